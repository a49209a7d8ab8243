#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rsum/dist_core.hpp"
#include "rsum/model.hpp"
#include "rsum/rng.hpp"
#include "rsum/transforms.hpp"

namespace rsum {

enum class BoundKind {
  normal_zero_mean,
  normal_zero_mean_indep,
  normal_poisson,
  gamma_stoploss,
  poisson_wasserstein,
  poisson_tv,
  normal_count_coupling_alt,
};

inline constexpr BoundKind kAllBoundKinds[] = {
    BoundKind::normal_zero_mean,    BoundKind::normal_zero_mean_indep,
    BoundKind::normal_poisson,      BoundKind::gamma_stoploss,
    BoundKind::poisson_wasserstein, BoundKind::poisson_tv,
    BoundKind::normal_count_coupling_alt,
};

inline std::string_view to_string(BoundKind k) {
  switch (k) {
    case BoundKind::normal_zero_mean: return "normal_zero_mean";
    case BoundKind::normal_zero_mean_indep: return "normal_zero_mean_indep";
    case BoundKind::normal_poisson: return "normal_poisson";
    case BoundKind::gamma_stoploss: return "gamma_stoploss";
    case BoundKind::poisson_wasserstein: return "poisson_wasserstein";
    case BoundKind::poisson_tv: return "poisson_tv";
    case BoundKind::normal_count_coupling_alt: return "normal_count_coupling_alt";
  }
  return "?";
}

inline BoundKind parse_bound_kind(std::string_view s) {
  for (BoundKind k : kAllBoundKinds)
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown bound kind: " + std::string(s));
}

/// Monte Carlo estimated ingredient of a bound.
struct McTerm {
  std::string name;
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// A bound value together with every constant needed to re-evaluate it.
struct BoundReport {
  BoundKind kind{};
  double value = 0.0;               // with Monte Carlo terms at their point estimates
  double value_conservative = 0.0;  // with Monte Carlo terms at estimate + 3 SE
  std::map<std::string, double> constants;
  std::vector<McTerm> mc_terms;
  std::string note;  // e.g. "assembled"
};

struct McOptions {
  std::uint64_t budget = 1'000'000;
  std::uint64_t seed = 1;
  double tail_eps = kDefaultTailEps;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// Mixture weight of the (N X_1)^z branch for mean-zero summands.
inline double tau(const RandomSumModel& model) {
  double f1 = model.count.factorial_moment(1), f2 = model.count.factorial_moment(2);
  double den = f1 + model.rho * f2;
  if (!(den > 0.0)) throw std::invalid_argument("tau: E[N] + rho E[N(N-1)] must be positive");
  return model.rho * (f2 + f1) / den;
}

/// Mixture weight of the (N X_1)^nz branch for Poisson(lambda) counts. Always >= rho.
inline double sigma(double lambda, const ClaimLaw& claim, double rho) {
  MomentSet m = moments(claim);
  double den = m.m2 + lambda * rho * m.variance;
  if (!(den > 0.0)) throw std::invalid_argument("sigma: E[X^2] + lambda rho Var(X) must be positive");
  double s = rho * (m.m2 + lambda * m.variance) / den;
  if (s < rho * (1.0 - 1e-12)) throw std::logic_error("sigma: sigma < rho");
  return s;
}

struct GammaParams {
  double r;  // shape
  double s;  // rate
};

/// Shape and rate of the gamma law matching the first two moments of Y (Poisson count).
inline GammaParams gamma_params(double lambda, const ClaimLaw& claim, double rho) {
  MomentSet m = moments(claim);
  if (!claim.non_negative() || !(m.mean > 0.0))
    throw std::invalid_argument("gamma_params: claim must be non-negative with positive mean");
  double den = m.m2 + lambda * rho * m.variance;
  return {lambda * m.mean * m.mean / den, m.mean / den};
}

/// Gamma Stein factor c_r.
inline double stein_factor_cr(double r) {
  if (!(r > 0.0)) throw std::invalid_argument("stein_factor_cr: r must be positive");
  return (std::sqrt(2.0 * std::numbers::pi) + std::exp(-1.0)) / std::sqrt(r + 2.0) + 2.0 / (r + 2.0);
}

/// E|(N X_1)^nz| for Poisson(lambda) counts and non-negative summands.
inline double beta(double lambda, const ClaimLaw& claim) {
  MomentSet m = moments(claim);
  double den = 2.0 * (m.m2 + lambda * m.variance);
  if (!(den > 0.0)) throw std::invalid_argument("beta: E[X^2] + lambda Var(X) must be positive");
  return ((lambda * lambda + 3.0 * lambda + 1.0) * m.m3 - lambda * (lambda + 1.0) * m.mean * m.m2) / den;
}

/// E|X' - X| for independent copies of a lattice claim.
inline double abs_diff_iid(const ClaimLaw& claim) {
  const LatticePmf& t = claim.table();
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t.size(); ++j)
      s += t.weights[i] * t.weights[j] * std::fabs(t.value(i) - t.value(j));
  return s;
}

// ---------------------------------------------------------------------------
// Monte Carlo ingredient
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> cumulative(const LatticePmf& p) {
  std::vector<double> c(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c[i] = (s += p.weights[i]);
  return c;
}

inline std::int64_t quantile_index(const LatticePmf& p, const std::vector<double>& cdf, double u) {
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return p.index(static_cast<std::size_t>(it - cdf.begin()));
}

struct Accum {
  double sum = 0.0;
  double sumsq = 0.0;
  std::uint64_t n = 0;
};

}  // namespace detail

/// E|sum_{j=1}^{N^s - 1} X'_j - Y| with (N, N^s - 1) under the quantile
/// coupling, Y drawn from the model given its count N, and the X'_j
/// independent copies of X_1. Work is split into fixed chunks on independent
/// streams so the estimate does not depend on the thread count.
inline McTerm mc_count_coupling_gap(const RandomSumModel& model, const McOptions& opt,
                                    std::string name = "D") {
  if (opt.budget < 2) throw std::invalid_argument("mc budget must be at least 2");
  LatticePmf n = tabulate(model.count, opt.tail_eps);
  LatticePmf ns1 = size_bias_minus_one_pmf(model.count, opt.tail_eps);
  std::vector<double> cn = detail::cumulative(n), cs = detail::cumulative(ns1);

  constexpr std::uint64_t kChunks = 64;
  std::vector<detail::Accum> acc(kChunks);
  auto run_chunk = [&](std::uint64_t c) {
    std::uint64_t count = opt.budget / kChunks + (c < opt.budget % kChunks ? 1 : 0);
    Engine rng = make_stream(opt.seed, c);
    detail::Accum a;
    for (std::uint64_t i = 0; i < count; ++i) {
      double u = uniform_open(rng);
      std::int64_t k = detail::quantile_index(n, cn, u);
      std::int64_t ks = detail::quantile_index(ns1, cs, u);
      bool comonotone = model.rho > 0.0 && uniform_open(rng) <= model.rho;
      double y = comonotone ? static_cast<double>(k) * model.claim.sample(rng)
                            : model.claim.sample_sum(k, rng);
      double sp = model.claim.sample_sum(ks, rng);
      double g = std::fabs(sp - y);
      a.sum += g;
      a.sumsq += g * g;
      ++a.n;
    }
    acc[c] = a;
  };
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, kChunks));
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < threads; ++w)
    workers.push_back(std::async(std::launch::async, [&, w] {
      for (std::uint64_t c = w; c < kChunks; c += threads) run_chunk(c);
    }));
  for (auto& f : workers) f.get();

  detail::Accum total;
  for (const auto& a : acc) {
    total.sum += a.sum;
    total.sumsq += a.sumsq;
    total.n += a.n;
  }
  double nn = static_cast<double>(total.n);
  double mean = total.sum / nn;
  double var = std::max(0.0, (total.sumsq - nn * mean * mean) / (nn - 1.0));
  return {std::move(name), mean, std::sqrt(var / nn)};
}

// ---------------------------------------------------------------------------
// Closed-form evaluation from constants
// ---------------------------------------------------------------------------

namespace detail {

inline double constant(const std::map<std::string, double>& c, const std::string& name) {
  auto it = c.find(name);
  if (it == c.end()) throw std::invalid_argument("bound report is missing constant '" + name + "'");
  return it->second;
}

// Constant or Monte Carlo term of the given name.
inline double ingredient(const std::map<std::string, double>& c, const std::vector<McTerm>& mc,
                         const std::string& name, bool conservative) {
  for (const auto& t : mc)
    if (t.name == name) return t.estimate + (conservative ? 3.0 * t.standard_error : 0.0);
  return constant(c, name);
}

}  // namespace detail

/// Evaluates the closed-form bound of `kind` from its constants.
inline double evaluate_bound(BoundKind kind, const std::map<std::string, double>& c,
                             const std::vector<McTerm>& mc, bool conservative = false) {
  auto k = [&](const char* n) { return detail::constant(c, n); };
  auto ing = [&](const char* n) { return detail::ingredient(c, mc, n, conservative); };
  switch (kind) {
    case BoundKind::normal_zero_mean:
    case BoundKind::normal_zero_mean_indep: {
      double t = k("tau"), sd = std::sqrt(k("var_y"));
      double head = t > 0.0 ? 2.0 * t * (1.0 + k("en3") * k("m3abs") / (2.0 * k("en2") * k("var_x") * sd)) : 0.0;
      return head + 2.0 * (1.0 - t) / sd * (k("m3abs") / (2.0 * k("var_x")) + ing("D"));
    }
    case BoundKind::normal_poisson: {
      double s = k("sigma");
      return (2.0 * s * k("alpha") + (1.0 - s) * k("m3abs") / k("m2") +
              2.0 * k("lambda") * (1.0 - s) * k("abs_diff_copy")) /
             std::sqrt(k("var_y"));
    }
    case BoundKind::gamma_stoploss: {
      double lam = k("lambda"), rho = k("rho"), s = k("sigma"), mu = k("mean"), m2 = k("m2");
      double brace = lam * rho * m2 / mu + s * (m2 / mu + k("beta")) + (s - rho) * lam * mu +
                     (1.0 - s) * k("delta_claim");
      return 2.0 * std::sqrt(lam * k("c_r") * mu * brace);
    }
    case BoundKind::poisson_wasserstein:
    case BoundKind::poisson_tv: {
      double rho = k("rho"), en = k("en"), mu = k("mean"), ratio = k("m2") / mu - 1.0;
      double first = k("delta_count") + en * k("m1absdev1") + k("en2") / en * ratio;
      double second = ratio + ing("D2");
      double core = (rho > 0.0 ? rho * first : 0.0) + (1.0 - rho) * second;
      return kind == BoundKind::poisson_tv ? core : 3.0 * std::sqrt(en * mu) * core;
    }
    case BoundKind::normal_count_coupling_alt:
      return (k("m3abs") / k("var_x") + k("dw_count_poisson") * k("m1abs")) /
             std::sqrt(k("var_x") * k("en"));
  }
  throw std::invalid_argument("evaluate_bound: unknown kind");
}

/// Re-evaluates a report from its own constants.
inline double reevaluate(const BoundReport& r, bool conservative = false) {
  return evaluate_bound(r.kind, r.constants, r.mc_terms, conservative);
}

namespace detail {

inline BoundReport finish(BoundKind kind, std::map<std::string, double> c, std::vector<McTerm> mc,
                          std::string note = {}) {
  BoundReport r{kind, 0.0, 0.0, std::move(c), std::move(mc), std::move(note)};
  r.value = reevaluate(r, false);
  r.value_conservative = reevaluate(r, true);
  return r;
}

inline void require_mean_zero(const MomentSet& x, const char* what) {
  if (std::fabs(x.mean) > 1e-12) throw std::invalid_argument(std::string(what) + ": claim mean must be zero");
  if (!(x.variance > 0.0)) throw std::invalid_argument(std::string(what) + ": claim variance must be positive");
}

inline double require_poisson(const CountLaw& count, const char* what) {
  auto* p = count.as<Poisson>();
  if (!p) throw std::invalid_argument(std::string(what) + ": count must be Poisson");
  return p->lambda;
}

inline void require_nonneg_integer_claim(const ClaimLaw& claim, const char* what) {
  if (!claim.non_negative() || !claim.integer_valued())
    throw std::invalid_argument(std::string(what) + ": claim must be non-negative integer-valued");
  if (!(moments(claim).mean > 0.0)) throw std::invalid_argument(std::string(what) + ": claim mean must be positive");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// Wasserstein bound for the standardized sum when summands have mean zero.
/// At rho = 0 the count-coupling term is E|N + 1 - N^s| E|X|; otherwise it is
/// estimated by Monte Carlo.
inline BoundReport bound_normal_zero_mean(const RandomSumModel& model, const McOptions& opt = {}) {
  MomentSet x = moments(model.claim);
  detail::require_mean_zero(x, "normal_zero_mean");
  MomentSet n = moments(model.count);
  MeanVar mv = mean_var(model);
  if (!(mv.variance > 0.0)) throw std::invalid_argument("normal_zero_mean: Var(Y) must be positive");
  std::map<std::string, double> c{{"tau", tau(model)}, {"rho", model.rho},    {"en", n.mean},
                                  {"en2", n.m2},       {"en3", n.m3},         {"m3abs", x.m3abs},
                                  {"var_x", x.variance}, {"m1abs", x.m1abs},  {"var_y", mv.variance}};
  if (model.rho == 0.0) {
    double delta = coupling_delta_count(model.count, opt.tail_eps);
    c["delta_count"] = delta;
    c["D"] = delta * x.m1abs;
    return detail::finish(BoundKind::normal_zero_mean_indep, std::move(c), {});
  }
  return detail::finish(BoundKind::normal_zero_mean, std::move(c), {mc_count_coupling_gap(model, opt, "D")});
}

/// Wasserstein bound for the standardized sum with a Poisson(lambda) count.
inline BoundReport bound_normal_poisson(double lambda, const ClaimLaw& claim, double rho) {
  if (!(lambda > 0.0)) throw std::invalid_argument("normal_poisson: lambda must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("normal_poisson: rho must lie in [0,1]");
  MomentSet x = moments(claim);
  double var_y = lambda * x.m2 + lambda * lambda * rho * x.variance;
  if (!(var_y > 0.0)) throw std::invalid_argument("normal_poisson: Var(Y) must be positive");
  double s = rho == 0.0 ? 0.0 : sigma(lambda, claim, rho);
  double alpha = std::sqrt(lambda * (1.0 + lambda * rho) * x.m2 + lambda * lambda * (1.0 - rho) * x.mean * x.mean);
  if (x.m2 + lambda * x.variance > 0.0) alpha += abs_mean_nz_product(lambda, claim);
  std::map<std::string, double> c{{"lambda", lambda},
                                  {"rho", rho},
                                  {"sigma", s},
                                  {"alpha", alpha},
                                  {"m3abs", x.m3abs},
                                  {"m2", x.m2},
                                  {"var_y", var_y},
                                  // at rho = 0 the copies can be taken equal to the summands
                                  {"abs_diff_copy", rho == 0.0 ? 0.0 : abs_diff_iid(claim)}};
  return detail::finish(BoundKind::normal_poisson, std::move(c), {});
}

inline BoundReport bound_normal_poisson(const RandomSumModel& model) {
  return bound_normal_poisson(detail::require_poisson(model.count, "normal_poisson"), model.claim, model.rho);
}

/// Stop-loss bound for gamma approximation with a Poisson(lambda) count.
inline BoundReport bound_gamma_stoploss(double lambda, const ClaimLaw& claim, double rho) {
  if (!(lambda > 0.0)) throw std::invalid_argument("gamma_stoploss: lambda must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("gamma_stoploss: rho must lie in [0,1]");
  MomentSet x = moments(claim);
  GammaParams g = gamma_params(lambda, claim, rho);
  double cr = stein_factor_cr(g.r);
  double s = rho == 0.0 ? 0.0 : sigma(lambda, claim, rho);
  std::map<std::string, double> c{{"lambda", lambda}, {"rho", rho},   {"mean", x.mean},
                                  {"m2", x.m2},       {"sigma", s},   {"r", g.r},
                                  {"s", g.s},         {"c_r", cr},    {"delta_claim", coupling_delta_claim(claim)}};
  // beta involves Var(N X_1); it only enters with weight sigma
  c["beta"] = (x.m2 + lambda * x.variance) > 0.0 ? beta(lambda, claim) : 0.0;
  BoundReport r = detail::finish(BoundKind::gamma_stoploss, std::move(c), {});
  // the smoothing width that balances both terms is half the bound
  r.constants["smoothing_eps"] = r.value / 2.0;
  return r;
}

inline BoundReport bound_gamma_stoploss(const RandomSumModel& model) {
  return bound_gamma_stoploss(detail::require_poisson(model.count, "gamma_stoploss"), model.claim, model.rho);
}

namespace detail {

inline BoundReport poisson_bound(BoundKind kind, const RandomSumModel& model, const McOptions& opt) {
  const char* what = kind == BoundKind::poisson_tv ? "poisson_tv" : "poisson_wasserstein";
  require_nonneg_integer_claim(model.claim, what);
  MomentSet x = moments(model.claim);
  MomentSet n = moments(model.count);
  double delta = coupling_delta_count(model.count, opt.tail_eps);
  std::map<std::string, double> c{{"rho", model.rho},   {"en", n.mean},   {"en2", n.m2},
                                  {"mean", x.mean},     {"m2", x.m2},     {"m1absdev1", x.m1absdev1},
                                  {"delta_count", delta}};
  std::vector<McTerm> mc;
  if (model.rho == 0.0)
    c["D2"] = delta * x.mean;
  else
    mc.push_back(mc_count_coupling_gap(model, opt, "D2"));
  std::string note = (kind == BoundKind::poisson_tv && model.rho > 0.0) ? "assembled" : "";
  return finish(kind, std::move(c), std::move(mc), std::move(note));
}

}  // namespace detail

/// Wasserstein bound for Poisson approximation of Y by Po(E[N] E[X_1]).
inline BoundReport bound_poisson_wasserstein(const RandomSumModel& model, const McOptions& opt = {}) {
  return detail::poisson_bound(BoundKind::poisson_wasserstein, model, opt);
}

/// Total-variation analogue: the Stein factor 3 E[Y]^{-1/2} becomes E[Y]^{-1}.
/// For rho > 0 the report carries the note "assembled".
inline BoundReport bound_poisson_tv(const RandomSumModel& model, const McOptions& opt = {}) {
  return detail::poisson_bound(BoundKind::poisson_tv, model, opt);
}

/// d_W(M, N) for M ~ Po(E[N]), from the CDF difference of truncated tables.
inline double wasserstein_count_to_poisson(const CountLaw& count, double tail_eps = kDefaultTailEps) {
  LatticePmf m = tabulate(CountLaw::poisson(count.factorial_moment(1)), tail_eps);
  return quantile_coupling_expectation(tabulate(count, tail_eps), m);
}

/// Alternative normal bound obtained from the Poisson-count bound and the
/// Wasserstein distance between N and a Poisson count with the same mean.
inline BoundReport bound_normal_count_coupling_alt(const RandomSumModel& model,
                                                   double tail_eps = kDefaultTailEps) {
  if (model.rho != 0.0) throw std::invalid_argument("normal_count_coupling_alt: requires rho = 0");
  MomentSet x = moments(model.claim);
  detail::require_mean_zero(x, "normal_count_coupling_alt");
  std::map<std::string, double> c{{"rho", 0.0},
                                  {"en", model.count.factorial_moment(1)},
                                  {"var_x", x.variance},
                                  {"m3abs", x.m3abs},
                                  {"m1abs", x.m1abs},
                                  {"dw_count_poisson", wasserstein_count_to_poisson(model.count, tail_eps)}};
  return detail::finish(BoundKind::normal_count_coupling_alt, std::move(c), {});
}

/// Dispatch by kind.
inline BoundReport compute_bound(BoundKind kind, const RandomSumModel& model, const McOptions& opt = {}) {
  switch (kind) {
    case BoundKind::normal_zero_mean: return bound_normal_zero_mean(model, opt);
    case BoundKind::normal_zero_mean_indep:
      if (model.rho != 0.0) throw std::invalid_argument("normal_zero_mean_indep: requires rho = 0");
      return bound_normal_zero_mean(model, opt);
    case BoundKind::normal_poisson: return bound_normal_poisson(model);
    case BoundKind::gamma_stoploss: return bound_gamma_stoploss(model);
    case BoundKind::poisson_wasserstein: return bound_poisson_wasserstein(model, opt);
    case BoundKind::poisson_tv: return bound_poisson_tv(model, opt);
    case BoundKind::normal_count_coupling_alt: return bound_normal_count_coupling_alt(model, opt.tail_eps);
  }
  throw std::invalid_argument("compute_bound: unknown kind");
}

}  // namespace rsum
