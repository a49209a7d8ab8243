#pragma once

// Experiment configuration, verification rows, worked-example tables and
// serialization shared by the command-line tool and the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsum/bounds.hpp"
#include "rsum/dist_core.hpp"
#include "rsum/metrics.hpp"
#include "rsum/model.hpp"

namespace rsum {

/// Invalid configuration: unknown keys, bad parameters, incompatible kinds.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::size_t kExactAtomLimit = 100'000;

enum class Target { normal, gamma, poisson };
enum class Format { csv, text };

inline std::string_view to_string(Target t) {
  switch (t) {
    case Target::normal: return "normal";
    case Target::gamma: return "gamma";
    case Target::poisson: return "poisson";
  }
  return "?";
}

inline Target target_for(BoundKind k) {
  switch (k) {
    case BoundKind::gamma_stoploss: return Target::gamma;
    case BoundKind::poisson_wasserstein:
    case BoundKind::poisson_tv: return Target::poisson;
    default: return Target::normal;
  }
}

struct ExperimentConfig {
  explicit ExperimentConfig(RandomSumModel m) : model(std::move(m)) {}

  RandomSumModel model;
  Target target = Target::normal;
  BoundKind bound_kind = BoundKind::normal_zero_mean;
  std::uint64_t mc_budget = 1'000'000;
  std::uint64_t seed = 1;
  double tail_eps = kDefaultTailEps;
  std::string output_path;  // empty: stdout
  Format format = Format::text;

  [[nodiscard]] McOptions mc() const { return {mc_budget, seed, tail_eps, 0}; }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

inline std::map<std::int64_t, double> weights_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": weights must be an object {\"k\": p}");
  std::map<std::int64_t, double> w;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t pos = 0;
    long long k;
    try {
      k = std::stoll(it.key(), &pos);
    } catch (const std::exception&) {
      throw ConfigError(where + ": support point '" + it.key() + "' is not an integer");
    }
    if (pos != it.key().size()) throw ConfigError(where + ": support point '" + it.key() + "' is not an integer");
    if (!it.value().is_number()) throw ConfigError(where + ": weight must be a number");
    w[k] += it.value().get<double>();
  }
  return w;
}

}  // namespace detail

/// {"family": "poisson", "lambda": L} | {"family": "binomial", "n": N, "p": P} |
/// {"family": "gamma_mixed_poisson", "r": R, "p": P} |
/// {"family": "hypergeometric", "population": M, "successes": K, "draws": D} |
/// {"family": "finite", "weights": {"k": p, ...}}
inline CountLaw count_from_json(const nlohmann::json& j) {
  const std::string where = "count";
  std::string fam = detail::require<std::string>(j, "family", where);
  try {
    if (fam == "poisson") {
      detail::check_keys(j, {"family", "lambda"}, where);
      return CountLaw::poisson(detail::require<double>(j, "lambda", where));
    }
    if (fam == "binomial") {
      detail::check_keys(j, {"family", "n", "p"}, where);
      return CountLaw::binomial(detail::require<std::int64_t>(j, "n", where), detail::require<double>(j, "p", where));
    }
    if (fam == "gamma_mixed_poisson" || fam == "negative_binomial") {
      detail::check_keys(j, {"family", "r", "p"}, where);
      return CountLaw::gamma_mixed_poisson(detail::require<double>(j, "r", where), detail::require<double>(j, "p", where));
    }
    if (fam == "hypergeometric") {
      detail::check_keys(j, {"family", "population", "successes", "draws"}, where);
      return CountLaw::hypergeometric(detail::require<std::int64_t>(j, "population", where),
                                      detail::require<std::int64_t>(j, "successes", where),
                                      detail::require<std::int64_t>(j, "draws", where));
    }
    if (fam == "finite") {
      detail::check_keys(j, {"family", "weights"}, where);
      return CountLaw::finite(detail::weights_from_json(j.at("weights"), where));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("count: ") + e.what());
  }
  throw ConfigError("count: unknown family '" + fam + "'");
}

/// {"family": "bernoulli", "p": P} | {"family": "finite_int", "weights": {...}} |
/// {"family": "lattice", "step": H, "weights": {"k": p}} (support points k*H) |
/// {"family": "rademacher", "scale": A}
inline ClaimLaw claim_from_json(const nlohmann::json& j) {
  const std::string where = "claim";
  std::string fam = detail::require<std::string>(j, "family", where);
  try {
    if (fam == "bernoulli") {
      detail::check_keys(j, {"family", "p"}, where);
      return ClaimLaw::bernoulli(detail::require<double>(j, "p", where));
    }
    if (fam == "finite_int") {
      detail::check_keys(j, {"family", "weights"}, where);
      return ClaimLaw::finite_int(detail::weights_from_json(j.at("weights"), where));
    }
    if (fam == "lattice") {
      detail::check_keys(j, {"family", "step", "weights"}, where);
      double step = j.contains("step") ? detail::require<double>(j, "step", where) : 1.0;
      return ClaimLaw::lattice(detail::weights_from_json(j.at("weights"), where), step);
    }
    if (fam == "rademacher") {
      detail::check_keys(j, {"family", "scale"}, where);
      return ClaimLaw::rademacher(j.contains("scale") ? detail::require<double>(j, "scale", where) : 1.0);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("claim: ") + e.what());
  }
  throw ConfigError("claim: unknown family '" + fam + "'");
}

/// Checks that the bound kind applies to the model; throws ConfigError naming
/// the violated precondition.
inline void validate_config(const ExperimentConfig& c) {
  const auto& m = c.model;
  MomentSet x = moments(m.claim);
  if (c.target != target_for(c.bound_kind))
    throw ConfigError("target '" + std::string(to_string(c.target)) + "' is incompatible with bound kind '" +
                      std::string(to_string(c.bound_kind)) + "'");
  if (!(c.tail_eps > 0.0 && c.tail_eps < 1.0)) throw ConfigError("tail_eps must lie in (0,1)");
  if (c.mc_budget < 2) throw ConfigError("mc_budget must be at least 2");
  switch (c.bound_kind) {
    case BoundKind::normal_zero_mean_indep:
    case BoundKind::normal_count_coupling_alt:
      if (m.rho != 0.0) throw ConfigError(std::string(to_string(c.bound_kind)) + " requires rho = 0");
      [[fallthrough]];
    case BoundKind::normal_zero_mean:
      if (std::fabs(x.mean) > 1e-12) throw ConfigError("normal_zero_mean requires a mean-zero claim (E[X] = 0)");
      if (!(x.variance > 0.0)) throw ConfigError("normal bounds require Var(X) > 0");
      break;
    case BoundKind::normal_poisson:
      if (!m.count.is_poisson()) throw ConfigError("normal_poisson requires a Poisson count");
      if (!(mean_var(m).variance > 0.0)) throw ConfigError("normal_poisson requires Var(Y) > 0");
      break;
    case BoundKind::gamma_stoploss:
      if (!m.count.is_poisson()) throw ConfigError("gamma_stoploss requires a Poisson count");
      if (!m.claim.non_negative() || !(x.mean > 0.0))
        throw ConfigError("gamma_stoploss requires a non-negative claim with positive mean");
      break;
    case BoundKind::poisson_wasserstein:
    case BoundKind::poisson_tv:
      if (!m.claim.non_negative() || !m.claim.integer_valued() || !(x.mean > 0.0))
        throw ConfigError("poisson bounds require a non-negative integer claim with positive mean");
      break;
  }
}

/// Parses a configuration document. Unknown keys anywhere are errors.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::require;
  check_keys(j, {"schema_version", "model", "target", "bound_kind", "mc_budget", "seed", "tail_eps", "output"},
             "config");
  int version = require<int>(j, "schema_version", "config");
  if (version != kConfigSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));
  const auto& mj = j.contains("model") ? j.at("model") : throw ConfigError("config: missing key 'model'");
  check_keys(mj, {"count", "claim", "rho"}, "model");
  if (!mj.contains("count") || !mj.contains("claim")) throw ConfigError("model: 'count' and 'claim' are required");
  double rho = mj.contains("rho") ? require<double>(mj, "rho", "model") : 0.0;
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("model: rho must lie in [0,1]");
  ExperimentConfig c{RandomSumModel(count_from_json(mj.at("count")), claim_from_json(mj.at("claim")), rho)};
  try {
    c.bound_kind = parse_bound_kind(require<std::string>(j, "bound_kind", "config"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("target")) {
    std::string t = require<std::string>(j, "target", "config");
    if (t == "normal")
      c.target = Target::normal;
    else if (t == "gamma")
      c.target = Target::gamma;
    else if (t == "poisson")
      c.target = Target::poisson;
    else
      throw ConfigError("config: unknown target '" + t + "'");
  } else {
    c.target = target_for(c.bound_kind);
  }
  if (j.contains("mc_budget")) c.mc_budget = require<std::uint64_t>(j, "mc_budget", "config");
  if (j.contains("seed")) c.seed = require<std::uint64_t>(j, "seed", "config");
  if (j.contains("tail_eps")) c.tail_eps = require<double>(j, "tail_eps", "config");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, {"path", "format"}, "output");
    if (o.contains("path")) c.output_path = require<std::string>(o, "path", "output");
    if (o.contains("format")) {
      std::string f = require<std::string>(o, "format", "output");
      if (f == "csv")
        c.format = Format::csv;
      else if (f == "text")
        c.format = Format::text;
      else
        throw ConfigError("output: format must be csv or text");
    }
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

inline BoundReport run_bound(const ExperimentConfig& c) {
  validate_config(c);
  return compute_bound(c.bound_kind, c.model, c.mc());
}

/// Number of lattice atoms the exact law of Y would occupy.
inline std::size_t exact_atom_estimate(const RandomSumModel& m, double tail_eps) {
  SupportRange r = truncated_support(m.count, tail_eps);
  const LatticePmf& x = m.claim.table();
  double span = static_cast<double>(x.index(x.size() - 1) - std::min<std::int64_t>(0, x.origin));
  span = std::max(span, static_cast<double>(std::max<std::int64_t>(0, x.index(x.size() - 1)) - x.origin));
  return static_cast<std::size_t>(static_cast<double>(r.hi) * span + 1.0);
}

/// Draws of Y on fixed chunked streams (stream indices offset from the bound's).
inline std::vector<double> sample_sums(const RandomSumModel& m, std::uint64_t n, std::uint64_t seed) {
  constexpr std::uint64_t kChunks = 64;
  constexpr std::uint64_t kStreamOffset = 1u << 20;
  std::vector<std::vector<double>> parts(kChunks);
  std::vector<std::future<void>> futs;
  for (std::uint64_t c = 0; c < kChunks; ++c)
    futs.push_back(std::async(std::launch::async, [&, c] {
      std::uint64_t count = n / kChunks + (c < n % kChunks ? 1 : 0);
      Engine rng = make_stream(seed, kStreamOffset + c);
      auto& out = parts[c];
      out.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) out.push_back(sample_sum(m, rng));
    }));
  for (auto& f : futs) f.get();
  std::vector<double> all;
  all.reserve(n);
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  return all;
}

/// The distance each bound dominates, measured exactly when the law of Y fits
/// in kExactAtomLimit atoms, otherwise from mc_budget draws.
inline DistanceEstimate measure_distance(const ExperimentConfig& c) {
  const auto& m = c.model;
  MeanVar mv = mean_var(m);
  bool exact = exact_atom_estimate(m, c.tail_eps) <= kExactAtomLimit;
  switch (c.target) {
    case Target::normal: {
      double sd = std::sqrt(mv.variance);
      if (exact) return wasserstein_pmf_vs_normal(exact_pmf(m, c.tail_eps), {mv.mean, sd});
      return wasserstein_empirical_vs_normal(sample_sums(m, c.mc_budget, c.seed), mv.mean, sd);
    }
    case Target::gamma: {
      GammaParams g = gamma_params(detail::require_poisson(m.count, "gamma"), m.claim, m.rho);
      if (exact) return stoploss_distance(exact_pmf(m, c.tail_eps), GammaTarget{g.r, g.s});
      auto s = sample_sums(m, c.mc_budget, c.seed);
      return stoploss_distance_empirical(s, GammaTarget{g.r, g.s});
    }
    case Target::poisson: {
      LatticePmf z = tabulate(CountLaw::poisson(mv.mean), c.tail_eps);
      LatticePmf y;
      double extra = 0.0;
      if (exact) {
        y = exact_pmf(m, c.tail_eps);
      } else {
        auto s = sample_sums(m, c.mc_budget, c.seed);
        std::map<std::int64_t, double> h;
        double w = 1.0 / static_cast<double>(s.size());
        for (double v : s) h[static_cast<std::int64_t>(std::llround(v))] += w;
        y = LatticePmf::from_map(h);
        extra = 3.0 * std::sqrt(static_cast<double>(y.size()) / static_cast<double>(s.size()));
      }
      DistanceEstimate d = c.bound_kind == BoundKind::poisson_tv ? tv_pmf(y, z) : wasserstein_pmf_vs_pmf(y, z);
      if (!exact) {
        d.method = DistanceMethod::empirical;
        d.error_bound += extra * (c.bound_kind == BoundKind::poisson_tv ? 1.0 : std::sqrt(mv.variance) + 1.0);
      }
      return d;
    }
  }
  throw std::logic_error("measure_distance: unknown target");
}

struct VerificationRow {
  ExperimentConfig config;
  BoundReport bound;
  DistanceEstimate distance;
  double slack = 0.0;
  double tolerance = 0.0;  // distance error band + 3 SE band of the bound
  bool pass = false;
};

inline VerificationRow run_verify(const ExperimentConfig& c) {
  VerificationRow row{c, run_bound(c), measure_distance(c)};
  row.slack = row.bound.value - row.distance.value;
  row.tolerance = row.distance.error_bound + (row.bound.value_conservative - row.bound.value);
  row.pass = row.slack >= -row.tolerance;
  return row;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline nlohmann::ordered_json to_json(const BoundReport& r) {
  nlohmann::ordered_json j;
  j["bound_kind"] = std::string(to_string(r.kind));
  j["value"] = r.value;
  j["value_conservative"] = r.value_conservative;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.constants) c[k] = v;
  j["constants"] = c;
  nlohmann::ordered_json mc = nlohmann::ordered_json::array();
  for (const auto& t : r.mc_terms)
    mc.push_back({{"name", t.name}, {"estimate", t.estimate}, {"standard_error", t.standard_error}});
  j["mc_terms"] = mc;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline nlohmann::ordered_json to_json(const DistanceEstimate& d) {
  return {{"kind", std::string(to_string(d.kind))},
          {"value", d.value},
          {"method", std::string(to_string(d.method))},
          {"error_bound", d.error_bound}};
}

inline nlohmann::ordered_json config_echo(const ExperimentConfig& c) {
  return {{"count", c.model.count.name()},  {"claim", c.model.claim.name()}, {"rho", c.model.rho},
          {"target", std::string(to_string(c.target))}, {"bound_kind", std::string(to_string(c.bound_kind))},
          {"seed", c.seed}, {"mc_budget", c.mc_budget}, {"tail_eps", c.tail_eps}};
}

inline nlohmann::ordered_json to_json(const VerificationRow& r) {
  return {{"config", config_echo(r.config)}, {"bound", to_json(r.bound)}, {"distance", to_json(r.distance)},
          {"slack", r.slack}, {"tolerance", r.tolerance}, {"pass", r.pass}};
}

/// Fixed CSV columns for bound and verification rows.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "count", "claim", "rho", "bound_kind", "target", "seed", "mc_budget", "tail_eps",
      "tau", "sigma", "alpha", "beta", "r", "s", "c_r",
      "bound", "bound_conservative", "distance", "distance_method", "distance_error", "slack", "pass"};
  return cols;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char ch : s) {
    if (ch == '"') o += '"';
    o += ch;
  }
  return o + "\"";
}

inline std::string constant_cell(const BoundReport& b, const char* name) {
  auto it = b.constants.find(name);
  return it == b.constants.end() ? "" : fmt_num(it->second);
}

inline std::vector<std::string> csv_cells(const ExperimentConfig& c, const BoundReport& b,
                                          const VerificationRow* v) {
  std::vector<std::string> cells = {
      c.model.count.name(), c.model.claim.name(), fmt_num(c.model.rho), std::string(to_string(b.kind)),
      std::string(to_string(c.target)), std::to_string(c.seed), std::to_string(c.mc_budget), fmt_num(c.tail_eps),
      constant_cell(b, "tau"), constant_cell(b, "sigma"), constant_cell(b, "alpha"), constant_cell(b, "beta"),
      constant_cell(b, "r"), constant_cell(b, "s"), constant_cell(b, "c_r"),
      fmt_num(b.value), fmt_num(b.value_conservative)};
  if (v) {
    cells.push_back(fmt_num(v->distance.value));
    cells.push_back(std::string(to_string(v->distance.method)));
    cells.push_back(fmt_num(v->distance.error_bound));
    cells.push_back(fmt_num(v->slack));
    cells.push_back(v->pass ? "true" : "false");
  } else {
    cells.insert(cells.end(), {"", "", "", "", ""});
  }
  return cells;
}

inline void write_csv_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_escape(cells[i]);
  os << '\n';
}

}  // namespace detail

inline void write_csv_header(std::ostream& os) { detail::write_csv_line(os, csv_columns()); }

inline void write_csv_row(std::ostream& os, const ExperimentConfig& c, const BoundReport& b) {
  detail::write_csv_line(os, detail::csv_cells(c, b, nullptr));
}

inline void write_csv_row(std::ostream& os, const VerificationRow& v) {
  detail::write_csv_line(os, detail::csv_cells(v.config, v.bound, &v));
}

// ---------------------------------------------------------------------------
// Tables for worked examples and rho sweeps
// ---------------------------------------------------------------------------

struct Cell {
  std::string text;
  double number = std::nan("");
  Cell(double v) : text(fmt_num(v)), number(v) {}  // NOLINT
  Cell(std::string s) : text(std::move(s)) {}      // NOLINT
  Cell(const char* s) : text(s) {}                 // NOLINT
};

struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
  [[nodiscard]] double num(std::size_t row, const std::string& col) const { return rows.at(row).at(column(col)).number; }
  [[nodiscard]] const std::string& text(std::size_t row, const std::string& col) const {
    return rows.at(row).at(column(col)).text;
  }
};

inline void write_table(std::ostream& os, const Table& t, Format f) {
  if (f == Format::csv) {
    detail::write_csv_line(os, t.columns);
    for (const auto& r : t.rows) {
      std::vector<std::string> cells;
      for (const auto& c : r) cells.push_back(c.text);
      detail::write_csv_line(os, cells);
    }
    return;
  }
  nlohmann::ordered_json j;
  j["title"] = t.title;
  j["columns"] = t.columns;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json o;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (std::isnan(r[i].number))
        o[t.columns[i]] = r[i].text;
      else
        o[t.columns[i]] = r[i].number;
    }
    rows.push_back(o);
  }
  j["rows"] = rows;
  os << j.dump(2) << '\n';
}

struct ReproduceOptions {
  std::vector<double> grid;  // overrides the example's default parameter grid when non-empty
  std::uint64_t seed = 1;
  std::uint64_t mc_budget = 100'000;
  double tail_eps = kDefaultTailEps;
};

inline const std::vector<std::string>& reproduce_ids() {
  static const std::vector<std::string> ids = {
      "eq13_poisson",         "binomial_2_1_1",       "hypergeometric_2_1_1",
      "negbin_eq17",          "shevtsova_compare_eq17_vs_18", "poisson_rho0_normal_sec2_2",
      "bernoulli_gamma_eq34", "poisson_examples_sec4", "alt_coupling_closing_remark"};
  return ids;
}

namespace detail {

inline std::vector<double> grid_or(const ReproduceOptions& o, std::vector<double> def) {
  return o.grid.empty() ? def : o.grid;
}

inline ExperimentConfig make_config(RandomSumModel m, BoundKind k, const ReproduceOptions& o) {
  ExperimentConfig c{std::move(m)};
  c.bound_kind = k;
  c.target = target_for(k);
  c.seed = o.seed;
  c.mc_budget = o.mc_budget;
  c.tail_eps = o.tail_eps;
  return c;
}

inline double verify_distance(const RandomSumModel& m, BoundKind k, const ReproduceOptions& o) {
  return measure_distance(make_config(m, k, o)).value;
}

}  // namespace detail

/// Worked examples over documented parameter grids: bound value, closed-form
/// display value for comparison and the measured distance where computable.
inline Table reproduce(const std::string& id, const ReproduceOptions& o = {}) {
  using detail::grid_or;
  using detail::verify_distance;
  Table t;
  t.title = id;
  const ClaimLaw rad = ClaimLaw::rademacher();
  if (id == "eq13_poisson") {
    // Poisson count, Rademacher claims, rho = 0: E|X|^3 / (sqrt(lambda) Var(X)^{3/2}).
    t.columns = {"lambda", "bound", "display", "distance"};
    for (double lam : grid_or(o, {10, 100, 1000})) {
      RandomSumModel m(CountLaw::poisson(lam), rad, 0.0);
      t.rows.push_back({lam, bound_normal_zero_mean(m).value, 1.0 / std::sqrt(lam),
                        verify_distance(m, BoundKind::normal_zero_mean, o)});
    }
  } else if (id == "binomial_2_1_1") {
    t.columns = {"n", "p", "delta_count", "bound", "display", "distance"};
    std::vector<std::pair<double, double>> grid = {{20, 0.1}, {100, 0.1}, {100, 0.5}, {1000, 0.05}};
    for (auto [n, p] : grid) {
      RandomSumModel m(CountLaw::binomial(static_cast<std::int64_t>(n), p), rad, 0.0);
      MomentSet x = moments(rad);
      double display = 2.0 / std::sqrt(n * p * x.variance) * (x.m3abs / (2.0 * x.variance) + p * x.m1abs);
      t.rows.push_back({n, p, coupling_delta_count(m.count), bound_normal_zero_mean(m).value, display,
                        verify_distance(m, BoundKind::normal_zero_mean, o)});
    }
  } else if (id == "hypergeometric_2_1_1") {
    t.columns = {"population", "successes", "draws", "delta_closed_form", "delta_quantile_coupling", "bound",
                 "distance"};
    struct H {
      std::int64_t m, k, d;
    };
    for (H h : {H{50, 10, 20}, H{200, 60, 50}, H{1000, 100, 300}}) {
      CountLaw cnt = CountLaw::hypergeometric(h.m, h.k, h.d);
      RandomSumModel m(cnt, rad, 0.0);
      t.rows.push_back({static_cast<double>(h.m), static_cast<double>(h.k), static_cast<double>(h.d),
                        coupling_delta_count(cnt), coupling_delta_count_exact(cnt), bound_normal_zero_mean(m).value,
                        verify_distance(m, BoundKind::normal_zero_mean, o)});
    }
  } else if (id == "negbin_eq17" || id == "shevtsova_compare_eq17_vs_18") {
    // Negative binomial count via a gamma mixing law, E[X^2] = 1 claims.
    t.columns = {"r", "p", "bound", "eq17_display", "eq18_comparator", "distance"};
    std::vector<std::pair<double, double>> grid;
    if (id == "negbin_eq17") {
      for (double r : grid_or(o, {10, 100, 1000})) grid.emplace_back(r, 0.5);
    } else {
      for (double r : grid_or(o, {10, 100, 1000})) {
        grid.emplace_back(r, 0.5);
        grid.emplace_back(r, 1.0 / r);
      }
    }
    MomentSet x = moments(rad);
    for (auto [r, p] : grid) {
      RandomSumModel m(CountLaw::gamma_mixed_poisson(r, p), rad, 0.0);
      double eq17 = std::sqrt(p / (1.0 - p)) * x.m3abs / std::sqrt(r) + 2.0 / std::sqrt(r) * std::sqrt((1.0 - p) / p) * x.m1abs;
      double eq18 = std::sqrt(p / (1.0 - p)) * x.m3abs / std::sqrt(r) + 1.0801 / r;
      bool small = exact_atom_estimate(m, o.tail_eps) <= kExactAtomLimit;
      t.rows.push_back({r, p, bound_normal_zero_mean(m).value, eq17, eq18,
                        small ? Cell(verify_distance(m, BoundKind::normal_zero_mean, o)) : Cell("")});
    }
  } else if (id == "poisson_rho0_normal_sec2_2") {
    // Poisson count, non-centred Bernoulli(1/2) claims, rho = 0.
    t.columns = {"lambda", "bound", "display", "zero_mean_consistency", "distance"};
    ClaimLaw b = ClaimLaw::bernoulli(0.5);
    for (double lam : grid_or(o, {10, 100, 1000})) {
      RandomSumModel m(CountLaw::poisson(lam), b, 0.0);
      MomentSet x = moments(b);
      double display = x.m3abs / (std::sqrt(lam) * std::pow(x.m2, 1.5));
      // with a centred claim both representations give the same bound
      double diff = bound_normal_poisson(lam, rad, 0.0).value -
                    bound_normal_zero_mean(RandomSumModel(CountLaw::poisson(lam), rad, 0.0)).value;
      t.rows.push_back({lam, bound_normal_poisson(m).value, display, std::fabs(diff),
                        verify_distance(m, BoundKind::normal_poisson, o)});
    }
  } else if (id == "bernoulli_gamma_eq34") {
    t.columns = {"lambda_p", "lambda", "p", "c_r", "bound", "display", "distance"};
    for (double lp : grid_or(o, {10, 50, 200})) {
      double p = 0.5, lam = lp / p;
      RandomSumModel m(CountLaw::poisson(lam), ClaimLaw::bernoulli(p), 0.0);
      double cr = stein_factor_cr(lp);
      t.rows.push_back({lp, lam, p, cr, bound_gamma_stoploss(m).value, std::sqrt(2.0 * lp * cr),
                        verify_distance(m, BoundKind::gamma_stoploss, o)});
    }
  } else if (id == "poisson_examples_sec4") {
    t.columns = {"count", "claim", "wasserstein_bound", "wasserstein_display", "wasserstein_distance", "tv_bound",
                 "tv_display", "tv_distance"};
    std::vector<std::pair<CountLaw, ClaimLaw>> cases = {
        {CountLaw::binomial(5, 0.2), ClaimLaw::bernoulli(0.5)},
        {CountLaw::binomial(50, 0.1), ClaimLaw::finite_int({{1, 0.8}, {2, 0.2}})},
        {CountLaw::gamma_mixed_poisson(20, 0.8), ClaimLaw::bernoulli(0.3)},
        {CountLaw::gamma_mixed_poisson(5, 0.5), ClaimLaw::constant(1)}};
    for (const auto& [cnt, cl] : cases) {
      RandomSumModel m(cnt, cl, 0.0);
      MomentSet x = moments(cl);
      double en = cnt.factorial_moment(1);
      double delta = coupling_delta_count(cnt);
      double tv_disp = x.m2 / x.mean - 1.0 + delta * x.mean;
      t.rows.push_back({cnt.name(), cl.name(), bound_poisson_wasserstein(m).value,
                        3.0 * std::sqrt(en * x.mean) * tv_disp, verify_distance(m, BoundKind::poisson_wasserstein, o),
                        bound_poisson_tv(m).value, tv_disp, verify_distance(m, BoundKind::poisson_tv, o)});
    }
  } else if (id == "alt_coupling_closing_remark") {
    t.columns = {"n", "p", "corollary_bound", "alt_bound", "dw_count_poisson", "two_p", "alt_exceeds"};
    double p = 0.1;
    for (double n : grid_or(o, {100, 1000, 10000})) {
      RandomSumModel m(CountLaw::binomial(static_cast<std::int64_t>(n), p), rad, 0.0);
      BoundReport cor = bound_normal_zero_mean(m);
      BoundReport alt = bound_normal_count_coupling_alt(m);
      t.rows.push_back({n, p, cor.value, alt.value, alt.constants.at("dw_count_poisson"), 2.0 * p,
                        alt.value > cor.value ? "true" : "false"});
    }
  } else {
    std::string msg = "unknown example id '" + id + "'; available:";
    for (const auto& s : reproduce_ids()) msg += " " + s;
    throw ConfigError(msg);
  }
  return t;
}

/// Bound and measured distance across a grid of correlation parameters. The
/// leading mixture weight (tau for mean-zero claims, sigma for Poisson counts)
/// is reported with a flag telling whether it increased from the previous row.
inline Table sweep_rho(const ExperimentConfig& base, std::vector<double> rhos) {
  // rows are emitted in ascending rho whatever order the grid was given in
  std::sort(rhos.begin(), rhos.end());
  rhos.erase(std::unique(rhos.begin(), rhos.end()), rhos.end());
  std::vector<std::future<VerificationRow>> futs;
  for (double r : rhos) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("sweep-rho: rho values must lie in [0,1]");
    ExperimentConfig c = base;
    c.model = base.model.with_rho(r);
    if (r > 0.0 && (c.bound_kind == BoundKind::normal_zero_mean_indep)) c.bound_kind = BoundKind::normal_zero_mean;
    validate_config(c);
    futs.push_back(std::async(std::launch::async, [c] { return run_verify(c); }));
  }
  Table t;
  t.title = "sweep_rho";
  t.columns = {"rho", "tau", "sigma", "weight_increasing", "bound", "bound_conservative", "distance", "slack", "pass"};
  double prev = -1.0;
  bool first = true;
  for (std::size_t i = 0; i < futs.size(); ++i) {
    VerificationRow v = futs[i].get();
    const auto& m = v.config.model;
    Cell tau_cell(""), sigma_cell("");
    double weight = std::nan("");
    if (std::fabs(moments(m.claim).mean) <= 1e-12) {
      weight = tau(m);
      tau_cell = Cell(weight);
    }
    if (m.count.is_poisson() && moments(m.claim).m2 > 0.0) {
      double s = sigma(m.count.as<Poisson>()->lambda, m.claim, m.rho);
      sigma_cell = Cell(s);
      if (std::isnan(weight)) weight = s;
    }
    std::string inc = first || std::isnan(weight) ? "" : (weight > prev ? "true" : "false");
    t.rows.push_back({m.rho, tau_cell, sigma_cell, inc, v.bound.value, v.bound.value_conservative,
                      v.distance.value, v.slack, v.pass ? "true" : "false"});
    prev = weight;
    first = false;
  }
  return t;
}

}  // namespace rsum
