#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsum/harness.hpp"

using namespace rsum;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_doc() {
  return json::parse(R"({
    "schema_version": 1,
    "model": {"count": {"family": "poisson", "lambda": 100.0},
              "claim": {"family": "rademacher"}, "rho": 0.0},
    "target": "normal",
    "bound_kind": "normal_zero_mean",
    "mc_budget": 20000,
    "seed": 7,
    "tail_eps": 1e-14,
    "output": {"format": "text"}
  })");
}

// Expects a ConfigError whose message contains `needle`.
void expect_config_error(const json& j, const std::string& needle) {
  try {
    config_from_json(j);
    ADD_FAILURE() << "accepted: " << j.dump();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

ExperimentConfig make(RandomSumModel m, BoundKind k) {
  ExperimentConfig c{std::move(m)};
  c.bound_kind = k;
  c.target = target_for(k);
  c.mc_budget = 20000;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("rsum_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const std::string& text) const {
    fs::path p = path_ / name;
    std::ofstream(p) << text;
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
  fs::path out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
  std::string cmd = std::string("\"") + RSUM_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                    err.string() + "\"";
  int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

}  // namespace

TEST(Config, ParsesFullDocument) {
  ExperimentConfig c = config_from_json(base_doc());
  EXPECT_EQ(c.target, Target::normal);
  EXPECT_EQ(c.bound_kind, BoundKind::normal_zero_mean);
  EXPECT_EQ(c.mc_budget, 20000u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.tail_eps, 1e-14);
  EXPECT_EQ(c.format, Format::text);
  EXPECT_TRUE(c.output_path.empty());
  EXPECT_TRUE(c.model.count.is_poisson());
  EXPECT_EQ(c.model.rho, 0.0);
}

TEST(Config, DefaultsTargetFromBoundKind) {
  json j = base_doc();
  j.erase("target");
  j["bound_kind"] = "gamma_stoploss";
  j["model"]["claim"] = {{"family", "bernoulli"}, {"p", 0.5}};
  EXPECT_EQ(config_from_json(j).target, Target::gamma);
}

TEST(Config, AllFamiliesParse) {
  std::vector<json> counts = {
      {{"family", "binomial"}, {"n", 10}, {"p", 0.3}},
      {{"family", "gamma_mixed_poisson"}, {"r", 3.0}, {"p", 0.4}},
      {{"family", "negative_binomial"}, {"r", 3.0}, {"p", 0.4}},
      {{"family", "hypergeometric"}, {"population", 30}, {"successes", 10}, {"draws", 8}},
      {{"family", "finite"}, {"weights", {{"2", 0.5}, {"6", 0.5}}}}};
  for (const auto& cnt : counts) {
    json j = base_doc();
    j["model"]["count"] = cnt;
    EXPECT_NO_THROW(config_from_json(j)) << cnt.dump();
  }
  std::vector<std::pair<json, std::string>> claims = {
      {{{"family", "finite_int"}, {"weights", {{"1", 0.5}, {"3", 0.5}}}}, "poisson_tv"},
      {{{"family", "bernoulli"}, {"p", 0.2}}, "poisson_wasserstein"},
      {{{"family", "lattice"}, {"step", 0.5}, {"weights", {{"-2", 0.25}, {"2", 0.25}, {"0", 0.5}}}}, "normal_zero_mean"},
      {{{"family", "rademacher"}, {"scale", 2.0}}, "normal_zero_mean"}};
  for (const auto& [cl, kind] : claims) {
    json j = base_doc();
    j.erase("target");
    j["model"]["claim"] = cl;
    j["bound_kind"] = kind;
    EXPECT_NO_THROW(config_from_json(j)) << cl.dump();
  }
  json j = base_doc();
  j["model"]["claim"] = {{"family", "finite_int"}, {"weights", {{"-1", 0.5}, {"1", 0.5}}}};
  expect_config_error(j, "non-negative");
}

TEST(Config, UnknownKeysAreErrors) {
  json j = base_doc();
  j["extra"] = 1;
  expect_config_error(j, "extra");
  j = base_doc();
  j["model"]["count"]["lamda"] = 3;
  expect_config_error(j, "lamda");
  j = base_doc();
  j["output"]["colour"] = "red";
  expect_config_error(j, "colour");
}

TEST(Config, SchemaVersionIsChecked) {
  json j = base_doc();
  j["schema_version"] = 2;
  expect_config_error(j, "schema_version");
  j.erase("schema_version");
  expect_config_error(j, "schema_version");
}

TEST(Config, ValidationNamesThePrecondition) {
  json j = base_doc();
  j["model"]["claim"] = {{"family", "bernoulli"}, {"p", 0.3}};
  expect_config_error(j, "mean-zero");

  j = base_doc();
  j["bound_kind"] = "gamma_stoploss";
  j["target"] = "gamma";
  j["model"]["count"] = {{"family", "binomial"}, {"n", 10}, {"p", 0.3}};
  j["model"]["claim"] = {{"family", "bernoulli"}, {"p", 0.3}};
  expect_config_error(j, "Poisson count");

  j = base_doc();
  j["bound_kind"] = "normal_poisson";
  j["model"]["count"] = {{"family", "binomial"}, {"n", 10}, {"p", 0.3}};
  expect_config_error(j, "Poisson count");

  j = base_doc();
  j["bound_kind"] = "poisson_tv";
  j["target"] = "poisson";
  expect_config_error(j, "non-negative integer");

  j = base_doc();
  j["target"] = "gamma";
  expect_config_error(j, "incompatible");

  j = base_doc();
  j["model"]["rho"] = 1.5;
  expect_config_error(j, "rho");

  j = base_doc();
  j["bound_kind"] = "normal_zero_mean_indep";
  j["model"]["rho"] = 0.2;
  expect_config_error(j, "rho = 0");

  j = base_doc();
  j["tail_eps"] = 0.0;
  expect_config_error(j, "tail_eps");

  j = base_doc();
  j["model"]["count"] = {{"family", "zipf"}};
  expect_config_error(j, "zipf");

  j = base_doc();
  j["model"]["count"] = {{"family", "poisson"}, {"lambda", -1.0}};
  expect_config_error(j, "count");

  j = base_doc();
  j["bound_kind"] = "normal_sideways";
  expect_config_error(j, "normal_sideways");
}

TEST(Bound, WorkedExamples) {
  EXPECT_NEAR(run_bound(make(RandomSumModel(CountLaw::poisson(100), ClaimLaw::rademacher(), 0.0),
                             BoundKind::normal_zero_mean))
                  .value,
              0.1, 1e-12);
  EXPECT_NEAR(run_bound(make(RandomSumModel(CountLaw::poisson(100), ClaimLaw::bernoulli(0.5), 0.0),
                             BoundKind::gamma_stoploss))
                  .value,
              6.611, 0.001);
  EXPECT_NEAR(run_bound(make(RandomSumModel(CountLaw::binomial(5, 0.2), ClaimLaw::bernoulli(0.5), 0.0),
                             BoundKind::poisson_tv))
                  .value,
              0.1, 1e-12);
}

TEST(Verify, PoissonRademacherNormal) {
  VerificationRow v =
      run_verify(make(RandomSumModel(CountLaw::poisson(100), ClaimLaw::rademacher(), 0.0), BoundKind::normal_zero_mean));
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.distance.method, DistanceMethod::exact_pmf);
  EXPECT_GT(v.distance.value, 0.0);
  EXPECT_LT(v.distance.value, 0.05);
  EXPECT_DOUBLE_EQ(v.slack, v.bound.value - v.distance.value);
}

TEST(Verify, UnitClaimsPoissonTvIsZero) {
  VerificationRow v =
      run_verify(make(RandomSumModel(CountLaw::poisson(3), ClaimLaw::constant(1), 0.7), BoundKind::poisson_tv));
  EXPECT_TRUE(v.pass);
  EXPECT_NEAR(v.bound.value, 0.0, 1e-12);
  EXPECT_NEAR(v.distance.value, 0.0, 1e-12);
}

TEST(Verify, NormalPoissonWithCorrelation) {
  VerificationRow v =
      run_verify(make(RandomSumModel(CountLaw::poisson(20), ClaimLaw::bernoulli(0.3), 0.2), BoundKind::normal_poisson));
  EXPECT_TRUE(v.pass);
  EXPECT_GT(v.slack, 0.0);
}

TEST(Verify, LargeSupportFallsBackToSampling) {
  ExperimentConfig c = make(RandomSumModel(CountLaw::poisson(3000), ClaimLaw::lattice({{-20, 0.6}, {30, 0.4}}), 0.0),
                            BoundKind::normal_zero_mean);
  c.mc_budget = 20000;
  ASSERT_GT(exact_atom_estimate(c.model, c.tail_eps), kExactAtomLimit);
  VerificationRow v = run_verify(c);
  EXPECT_EQ(v.distance.method, DistanceMethod::empirical);
  EXPECT_TRUE(v.pass);
}

TEST(Verify, DeterministicSerialization) {
  ExperimentConfig c = make(RandomSumModel(CountLaw::binomial(30, 0.4), ClaimLaw::rademacher(), 0.4),
                            BoundKind::normal_zero_mean);
  c.seed = 99;
  std::string a = to_json(run_verify(c)).dump(), b = to_json(run_verify(c)).dump();
  EXPECT_EQ(a, b);
  c.seed = 100;
  EXPECT_NE(to_json(run_verify(c)).dump(), a);  // the MC term moves with the seed
}

TEST(Csv, FixedColumns) {
  std::ostringstream os;
  write_csv_header(os);
  EXPECT_EQ(os.str(),
            "count,claim,rho,bound_kind,target,seed,mc_budget,tail_eps,tau,sigma,alpha,beta,r,s,c_r,"
            "bound,bound_conservative,distance,distance_method,distance_error,slack,pass\n");
  ExperimentConfig c = make(RandomSumModel(CountLaw::poisson(100), ClaimLaw::bernoulli(0.5), 0.0),
                            BoundKind::gamma_stoploss);
  std::ostringstream row;
  write_csv_row(row, run_verify(c));
  std::string line = row.str();
  EXPECT_EQ(line.back(), '\n');
  // quoted fields contain no commas here, so a plain count works
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), static_cast<long>(csv_columns().size() - 1)) << line;
  EXPECT_NE(line.find("true"), std::string::npos);
}

TEST(Reproduce, Eq13Grid) {
  Table t = reproduce("eq13_poisson");
  ASSERT_EQ(t.rows.size(), 3u);
  const double want[] = {0.31622776601683794, 0.1, 0.031622776601683794};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(t.num(i, "bound"), want[i], 1e-12);
    EXPECT_NEAR(t.num(i, "display"), want[i], 1e-12);
    EXPECT_LE(t.num(i, "distance"), t.num(i, "bound"));
  }
}

TEST(Reproduce, NegativeBinomialComparison) {
  Table t = reproduce("negbin_eq17", {.grid = {100}, .seed = 1, .mc_budget = 20000, .tail_eps = kDefaultTailEps});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NEAR(t.num(0, "eq17_display"), 0.3, 1e-6);
  EXPECT_NEAR(t.num(0, "bound"), 0.3, 1e-6);
  EXPECT_NEAR(t.num(0, "eq18_comparator"), 0.110801, 1e-6);
  Table s = reproduce("shevtsova_compare_eq17_vs_18", {.grid = {100}, .seed = 1, .mc_budget = 20000, .tail_eps = kDefaultTailEps});
  EXPECT_EQ(s.rows.size(), 2u);
  EXPECT_NEAR(s.num(0, "eq18_comparator"), 0.110801, 1e-6);
}

TEST(Reproduce, GammaGridMatchesStoredFactor) {
  Table t = reproduce("bernoulli_gamma_eq34");
  ASSERT_EQ(t.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    double lp = t.num(i, "lambda_p");
    EXPECT_NEAR(t.num(i, "bound"), std::sqrt(2.0 * lp * stein_factor_cr(lp)), 1e-9);
    EXPECT_LE(t.num(i, "distance"), t.num(i, "bound"));
  }
  EXPECT_NEAR(t.num(1, "bound"), 6.611, 0.001);
}

TEST(Reproduce, EveryIdRuns) {
  for (const auto& id : reproduce_ids()) {
    Table t = reproduce(id, {.grid = {}, .seed = 1, .mc_budget = 20000, .tail_eps = kDefaultTailEps});
    EXPECT_FALSE(t.rows.empty()) << id;
    for (const auto& r : t.rows) EXPECT_EQ(r.size(), t.columns.size()) << id;
  }
}

TEST(Reproduce, AltCouplingFlagFollowsDistanceVersusTwoP) {
  Table t = reproduce("alt_coupling_closing_remark");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    bool exceeds = t.text(i, "alt_exceeds") == "true";
    EXPECT_EQ(exceeds, t.num(i, "dw_count_poisson") > t.num(i, "two_p"));
    EXPECT_EQ(exceeds, t.num(i, "alt_bound") > t.num(i, "corollary_bound"));
  }
}

TEST(Reproduce, UnknownIdListsAvailable) {
  try {
    reproduce("nope");
    FAIL();
  } catch (const ConfigError& e) {
    for (const auto& id : reproduce_ids()) EXPECT_NE(std::string(e.what()).find(id), std::string::npos);
  }
}

TEST(SweepRho, ZeroRowMatchesShortCircuit) {
  ExperimentConfig base = make(RandomSumModel(CountLaw::binomial(40, 0.3), ClaimLaw::rademacher(), 0.0),
                               BoundKind::normal_zero_mean_indep);
  Table t = sweep_rho(base, {0.5, 0.0, 0.1, 1.0, 0.25});
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.num(0, "rho"), 0.0);
  EXPECT_EQ(t.num(0, "bound"), run_bound(base).value);
  BoundReport direct = bound_normal_zero_mean(base.model);
  EXPECT_EQ(direct.kind, BoundKind::normal_zero_mean_indep);
  EXPECT_TRUE(direct.mc_terms.empty());
  EXPECT_EQ(t.num(0, "bound"), direct.value);
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    EXPECT_GT(t.num(i, "rho"), t.num(i - 1, "rho"));
    EXPECT_GT(t.num(i, "tau"), t.num(i - 1, "tau"));
    EXPECT_EQ(t.text(i, "weight_increasing"), "true");
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) EXPECT_EQ(t.text(i, "pass"), "true") << i;
}

TEST(SweepRho, ConstantCountAtFullCorrelation) {
  ExperimentConfig base = make(RandomSumModel(CountLaw::constant(6), ClaimLaw::rademacher(), 0.0),
                               BoundKind::normal_zero_mean);
  Table t = sweep_rho(base, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(t.num(1, "tau"), 1.0);
  ExperimentConfig pb = make(RandomSumModel(CountLaw::poisson(8), ClaimLaw::bernoulli(0.4), 0.0),
                             BoundKind::normal_poisson);
  Table p = sweep_rho(pb, {0.0, 0.5, 1.0});
  EXPECT_DOUBLE_EQ(p.num(2, "sigma"), 1.0);
  EXPECT_GT(p.num(1, "sigma"), p.num(0, "sigma"));
}

TEST(SweepRho, RejectsOutOfRange) {
  ExperimentConfig base = make(RandomSumModel(CountLaw::poisson(8), ClaimLaw::rademacher(), 0.0),
                               BoundKind::normal_zero_mean);
  EXPECT_THROW(sweep_rho(base, {0.0, 1.2}), ConfigError);
}

TEST(Cli, BoundPrintsReportAndExitsZero) {
  TempDir d;
  fs::path cfg = d.write("c.json", base_doc().dump());
  CliResult r = run_cli(d, "bound --config \"" + cfg.string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_NEAR(j["bound"]["value"].get<double>(), 0.1, 1e-12);
  EXPECT_EQ(j["config"]["bound_kind"], "normal_zero_mean");
}

TEST(Cli, ConfigErrorsExitOne) {
  TempDir d;
  json bad = base_doc();
  bad["model"]["claim"] = {{"family", "bernoulli"}, {"p", 0.3}};
  CliResult r = run_cli(d, "bound --config \"" + d.write("bad.json", bad.dump()).string() + "\"");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("mean-zero"), std::string::npos) << r.err;

  r = run_cli(d, "verify --config \"" + d.write("broken.json", "{ not json").string() + "\"");
  EXPECT_EQ(r.code, 1);
  r = run_cli(d, "bound --config \"" + (d.path() / "missing.json").string() + "\"");
  EXPECT_EQ(r.code, 1);
  r = run_cli(d, "reproduce --id nope");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("eq13_poisson"), std::string::npos);
}

TEST(Cli, VerifyCsvToFileIsByteIdentical) {
  TempDir d;
  json j = base_doc();
  j["model"]["count"] = {{"family", "binomial"}, {"n", 30}, {"p", 0.4}};
  j["model"]["rho"] = 0.3;
  fs::path cfg = d.write("c.json", j.dump());
  fs::path a = d.path() / "a.csv", b = d.path() / "b.csv";
  CliResult r1 = run_cli(d, "verify --config \"" + cfg.string() + "\" --format csv --seed 3 --out \"" + a.string() + "\"");
  CliResult r2 = run_cli(d, "verify --config \"" + cfg.string() + "\" --format csv --seed 3 --out \"" + b.string() + "\"");
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(r2.code, 0) << r2.err;
  std::string sa = slurp(a);
  EXPECT_EQ(sa, slurp(b));
  EXPECT_EQ(sa.rfind("count,claim,rho,", 0), 0u);
  EXPECT_TRUE(r1.out.empty());
}

TEST(Cli, ReproduceAndSweep) {
  TempDir d;
  CliResult r = run_cli(d, "reproduce --id eq13_poisson --grid 100,400 --format csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("lambda,bound,display,distance"), std::string::npos);
  EXPECT_NE(r.out.find("\n400,0.05,"), std::string::npos) << r.out;

  fs::path cfg = d.write("c.json", base_doc().dump());
  r = run_cli(d, "sweep-rho --config \"" + cfg.string() + "\" --rhos 0,0.2,0.6");
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["columns"][0], "rho");
}

TEST(Regression, ShippedConfigsPass) {
  int seen = 0;
  for (const auto& e : fs::directory_iterator(fs::path(RSUM_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".json") continue;
    ExperimentConfig c = load_config(e.path().string());
    VerificationRow v = run_verify(c);
    EXPECT_TRUE(v.pass) << e.path() << " slack " << v.slack;
    ++seen;
  }
  EXPECT_GE(seen, 3);
}
