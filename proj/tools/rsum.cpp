// rsum: compute, verify and tabulate approximation bounds for random sums.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsum/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitVerifyFailed = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> mc_budget;
  std::optional<double> tail_eps;
  std::string out;
  std::string format;
};

void apply(const Overrides& o, rsum::ExperimentConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.mc_budget) c.mc_budget = *o.mc_budget;
  if (o.tail_eps) c.tail_eps = *o.tail_eps;
  if (!o.out.empty()) c.output_path = o.out;
  if (o.format == "csv") c.format = rsum::Format::csv;
  if (o.format == "text") c.format = rsum::Format::text;
  rsum::validate_config(c);
}

// Output stream chosen by --out / output.path; stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw rsum::ConfigError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds for sums of a random number of correlated summands"};
  app.require_subcommand(1);

  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "RNG seed for Monte Carlo terms");
    sub->add_option("--mc-budget", ov.mc_budget, "Monte Carlo sample budget");
    sub->add_option("--tail-eps", ov.tail_eps, "Tail mass dropped when tabulating unbounded laws");
    sub->add_option("--out", ov.out, "Write results to this file instead of stdout");
    sub->add_option("--format", ov.format, "Output format")->check(CLI::IsMember({"csv", "text"}));
  };

  std::string config_path;
  auto* bound = app.add_subcommand("bound", "Compute a bound from a configuration file");
  bound->add_option("--config", config_path, "JSON configuration")->required();
  add_common(bound);

  auto* verify = app.add_subcommand("verify", "Compute a bound and compare it with the measured distance");
  verify->add_option("--config", config_path, "JSON configuration")->required();
  add_common(verify);

  std::string repro_id;
  std::vector<double> grid;
  auto* repro = app.add_subcommand("reproduce", "Tabulate a worked example");
  repro->add_option("--id", repro_id, "Example id")->required();
  repro->add_option("--grid", grid, "Override the example's parameter grid")->delimiter(',');
  add_common(repro);

  std::vector<double> rhos;
  auto* sweep = app.add_subcommand("sweep-rho", "Bound and distance across correlation values");
  sweep->add_option("--config", config_path, "JSON configuration")->required();
  sweep->add_option("--rhos", rhos, "Correlation values")->required()->delimiter(',');
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (repro->parsed()) {
      rsum::ReproduceOptions o;
      o.grid = grid;
      if (ov.seed) o.seed = *ov.seed;
      if (ov.mc_budget) o.mc_budget = *ov.mc_budget;
      if (ov.tail_eps) o.tail_eps = *ov.tail_eps;
      rsum::Table t = rsum::reproduce(repro_id, o);
      Sink sink(ov.out);
      rsum::write_table(sink.get(), t, ov.format == "csv" ? rsum::Format::csv : rsum::Format::text);
      return kExitOk;
    }

    rsum::ExperimentConfig c = rsum::load_config(config_path);
    apply(ov, c);
    Sink sink(c.output_path);
    std::ostream& os = sink.get();

    if (bound->parsed()) {
      rsum::BoundReport r = rsum::run_bound(c);
      if (c.format == rsum::Format::csv) {
        rsum::write_csv_header(os);
        rsum::write_csv_row(os, c, r);
      } else {
        nlohmann::ordered_json j;
        j["config"] = rsum::config_echo(c);
        j["bound"] = rsum::to_json(r);
        os << j.dump(2) << '\n';
      }
      return kExitOk;
    }
    if (verify->parsed()) {
      rsum::VerificationRow row = rsum::run_verify(c);
      if (c.format == rsum::Format::csv) {
        rsum::write_csv_header(os);
        rsum::write_csv_row(os, row);
      } else {
        os << rsum::to_json(row).dump(2) << '\n';
      }
      return row.pass ? kExitOk : kExitVerifyFailed;
    }
    if (sweep->parsed()) {
      rsum::Table t = rsum::sweep_rho(c, rhos);
      rsum::write_table(os, t, c.format);
      for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.text(i, "pass") != "true") return kExitVerifyFailed;
      return kExitOk;
    }
  } catch (const rsum::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
