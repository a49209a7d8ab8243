#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "rsum/lattice_pmf.hpp"
#include "rsum/rng.hpp"

namespace rsum {

inline constexpr double kDefaultTailEps = 1e-12;
inline constexpr double kMassTolerance = 1e-12;

// sgn(0) = +1 throughout.
inline double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

/// Moment vocabulary consumed by the bound formulas.
struct MomentSet {
  double mean = 0.0;
  double variance = 0.0;
  double m2 = 0.0;         // E[X^2]
  double m3 = 0.0;         // E[X^3]
  double m3abs = 0.0;      // E|X|^3
  double m2sgn = 0.0;      // E[X^2 sgn X]
  double m1abs = 0.0;      // E|X|
  double m1absdev1 = 0.0;  // E|X - 1|
};

// ---------------------------------------------------------------------------
// Count laws
// ---------------------------------------------------------------------------

struct Poisson {
  double lambda;
};
struct Binomial {
  std::int64_t n;
  double p;
};
/// Negative binomial realized as Po(L) with L ~ Gamma(shape r, scale (1-p)/p).
struct GammaMixedPoisson {
  double r;
  double p;
  [[nodiscard]] double mixing_mean() const { return r * (1.0 - p) / p; }
  [[nodiscard]] double mixing_variance() const { return r * (1.0 - p) * (1.0 - p) / (p * p); }
};
struct Hypergeometric {
  std::int64_t population;
  std::int64_t successes;
  std::int64_t draws;
};
struct FinitePmf {
  std::map<std::int64_t, double> weights;
};

class CountLaw {
 public:
  using Family = std::variant<Poisson, Binomial, GammaMixedPoisson, Hypergeometric, FinitePmf>;

  explicit CountLaw(Family f) : family_(std::move(f)) { validate(); }

  static CountLaw poisson(double lambda) { return CountLaw(Poisson{lambda}); }
  static CountLaw binomial(std::int64_t n, double p) { return CountLaw(Binomial{n, p}); }
  static CountLaw gamma_mixed_poisson(double r, double p) {
    return CountLaw(GammaMixedPoisson{r, p});
  }
  static CountLaw hypergeometric(std::int64_t population, std::int64_t successes,
                                 std::int64_t draws) {
    return CountLaw(Hypergeometric{population, successes, draws});
  }
  static CountLaw finite(std::map<std::int64_t, double> w) {
    return CountLaw(FinitePmf{std::move(w)});
  }
  static CountLaw constant(std::int64_t n) { return finite({{n, 1.0}}); }

  [[nodiscard]] const Family& family() const { return family_; }
  template <class T>
  [[nodiscard]] const T* as() const { return std::get_if<T>(&family_); }
  [[nodiscard]] bool is_poisson() const { return as<Poisson>() != nullptr; }

  [[nodiscard]] std::string name() const;

  /// Smallest and largest support points (hi = INT64_MAX when unbounded).
  [[nodiscard]] std::int64_t support_min() const;
  [[nodiscard]] std::int64_t support_max() const;

  [[nodiscard]] double pmf(std::int64_t k) const;

  /// Factorial moment E[N(N-1)...(N-j+1)], j = 1, 2, 3.
  [[nodiscard]] double factorial_moment(int j) const;

  [[nodiscard]] std::int64_t sample(Engine& rng) const;

 private:
  void validate() const;
  Family family_;
};

namespace detail {

inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

inline void validate_weights(const std::map<std::int64_t, double>& w, const char* what) {
  if (w.empty()) throw std::invalid_argument(std::string(what) + ": empty support");
  double s = 0.0;
  for (auto [k, p] : w) {
    if (!(p >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative weight");
    s += p;
  }
  if (std::fabs(s - 1.0) > kMassTolerance)
    throw std::invalid_argument(std::string(what) + ": weights do not sum to 1");
}

}  // namespace detail

inline void CountLaw::validate() const {
  std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Poisson>) {
          if (!(f.lambda > 0.0 && std::isfinite(f.lambda)))
            throw std::invalid_argument("poisson: lambda must be positive");
        } else if constexpr (std::is_same_v<T, Binomial>) {
          if (f.n < 1) throw std::invalid_argument("binomial: n must be a positive integer");
          if (!(f.p > 0.0 && f.p <= 1.0))
            throw std::invalid_argument("binomial: p must lie in (0,1] so that E[N] > 0");
        } else if constexpr (std::is_same_v<T, GammaMixedPoisson>) {
          if (!(f.r > 0.0)) throw std::invalid_argument("gamma_mixed_poisson: r must be positive");
          if (!(f.p > 0.0 && f.p < 1.0))
            throw std::invalid_argument("gamma_mixed_poisson: p must lie in (0,1)");
        } else if constexpr (std::is_same_v<T, Hypergeometric>) {
          if (f.population < 1 || f.successes < 0 || f.successes > f.population ||
              f.draws < 1 || f.draws > f.population)
            throw std::invalid_argument("hypergeometric: invalid (population, successes, draws)");
          if (f.successes == 0)
            throw std::invalid_argument("hypergeometric: zero successes gives E[N] = 0");
        } else {
          detail::validate_weights(f.weights, "finite count pmf");
          if (f.weights.begin()->first < 0)
            throw std::invalid_argument("finite count pmf: negative support point");
          double mean = 0.0;
          for (auto [k, p] : f.weights) mean += static_cast<double>(k) * p;
          if (!(mean > 0.0)) throw std::invalid_argument("finite count pmf: E[N] must be positive");
        }
      },
      family_);
}

inline std::string CountLaw::name() const {
  char buf[160] = {0};
  std::string result;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Poisson>) {
          std::snprintf(buf, sizeof buf, "poisson(lambda=%.10g)", f.lambda);
        } else if constexpr (std::is_same_v<T, Binomial>) {
          std::snprintf(buf, sizeof buf, "binomial(n=%lld;p=%.10g)", static_cast<long long>(f.n), f.p);
        } else if constexpr (std::is_same_v<T, GammaMixedPoisson>) {
          std::snprintf(buf, sizeof buf, "gamma_mixed_poisson(r=%.10g;p=%.10g)", f.r, f.p);
        } else if constexpr (std::is_same_v<T, Hypergeometric>) {
          std::snprintf(buf, sizeof buf, "hypergeometric(population=%lld;successes=%lld;draws=%lld)",
                        static_cast<long long>(f.population), static_cast<long long>(f.successes),
                        static_cast<long long>(f.draws));
        } else {
          std::string s = "finite(";
          bool first = true;
          for (auto [k, p] : f.weights) {
            char item[64];
            std::snprintf(item, sizeof item, "%s%lld:%.10g", first ? "" : ";", static_cast<long long>(k), p);
            s += item;
            first = false;
          }
          s += ")";
          result = s;
        }
      },
      family_);
  return result.empty() ? std::string(buf) : result;
}

inline std::int64_t CountLaw::support_min() const {
  if (auto* h = as<Hypergeometric>())
    return std::max<std::int64_t>(0, h->draws - (h->population - h->successes));
  if (auto* f = as<FinitePmf>()) return f->weights.begin()->first;
  return 0;
}

inline std::int64_t CountLaw::support_max() const {
  if (auto* b = as<Binomial>()) return b->n;
  if (auto* h = as<Hypergeometric>()) return std::min(h->draws, h->successes);
  if (auto* f = as<FinitePmf>()) return f->weights.rbegin()->first;
  return INT64_MAX;
}

inline double CountLaw::pmf(std::int64_t k) const {
  if (k < support_min() || k > support_max()) return 0.0;
  double kd = static_cast<double>(k);
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Poisson>) {
          return std::exp(kd * std::log(f.lambda) - f.lambda - std::lgamma(kd + 1.0));
        } else if constexpr (std::is_same_v<T, Binomial>) {
          if (f.p == 1.0) return k == f.n ? 1.0 : 0.0;
          double n = static_cast<double>(f.n);
          return std::exp(detail::log_choose(n, kd) + kd * std::log(f.p) +
                          (n - kd) * std::log1p(-f.p));
        } else if constexpr (std::is_same_v<T, GammaMixedPoisson>) {
          return std::exp(std::lgamma(kd + f.r) - std::lgamma(f.r) - std::lgamma(kd + 1.0) +
                          f.r * std::log(f.p) + kd * std::log1p(-f.p));
        } else if constexpr (std::is_same_v<T, Hypergeometric>) {
          double m = static_cast<double>(f.population), s = static_cast<double>(f.successes),
                 d = static_cast<double>(f.draws);
          return std::exp(detail::log_choose(s, kd) + detail::log_choose(m - s, d - kd) -
                          detail::log_choose(m, d));
        } else {
          auto it = f.weights.find(k);
          return it == f.weights.end() ? 0.0 : it->second;
        }
      },
      family_);
}

inline double CountLaw::factorial_moment(int j) const {
  if (j < 1 || j > 3) throw std::invalid_argument("factorial_moment: order must be 1..3");
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Poisson>) {
          return std::pow(f.lambda, j);
        } else if constexpr (std::is_same_v<T, Binomial>) {
          double v = 1.0;
          for (int i = 0; i < j; ++i) v *= static_cast<double>(f.n - i) * f.p;
          return v;
        } else if constexpr (std::is_same_v<T, GammaMixedPoisson>) {
          // E[L^j] for L ~ Gamma(shape r, scale theta).
          double theta = (1.0 - f.p) / f.p;
          double v = 1.0;
          for (int i = 0; i < j; ++i) v *= (f.r + i) * theta;
          return v;
        } else if constexpr (std::is_same_v<T, Hypergeometric>) {
          double v = 1.0;
          for (int i = 0; i < j; ++i)
            v *= static_cast<double>(f.draws - i) * static_cast<double>(f.successes - i) /
                 static_cast<double>(f.population - i);
          return v;
        } else {
          double v = 0.0;
          for (auto [k, p] : f.weights) {
            double t = 1.0;
            for (int i = 0; i < j; ++i) t *= static_cast<double>(k - i);
            v += t * p;
          }
          return v;
        }
      },
      family_);
}

namespace detail {

inline std::int64_t sample_from_map(const std::map<std::int64_t, double>& w, Engine& rng) {
  double u = uniform_open(rng);
  double c = 0.0;
  for (auto [k, p] : w) {
    c += p;
    if (u <= c) return k;
  }
  for (auto it = w.rbegin(); it != w.rend(); ++it)
    if (it->second > 0.0) return it->first;
  return w.rbegin()->first;
}

}  // namespace detail

inline std::int64_t CountLaw::sample(Engine& rng) const {
  return std::visit(
      [&](const auto& f) -> std::int64_t {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Poisson>) {
          return std::poisson_distribution<std::int64_t>(f.lambda)(rng);
        } else if constexpr (std::is_same_v<T, Binomial>) {
          return std::binomial_distribution<std::int64_t>(f.n, f.p)(rng);
        } else if constexpr (std::is_same_v<T, GammaMixedPoisson>) {
          double lam = std::gamma_distribution<double>(f.r, (1.0 - f.p) / f.p)(rng);
          if (lam <= 0.0) return 0;
          return std::poisson_distribution<std::int64_t>(lam)(rng);
        } else if constexpr (std::is_same_v<T, Hypergeometric>) {
          // Sequential draws without replacement.
          std::int64_t good = f.successes, total = f.population, k = 0;
          for (std::int64_t i = 0; i < f.draws; ++i) {
            double u = uniform_open(rng);
            if (u * static_cast<double>(total) < static_cast<double>(good)) {
              ++k;
              --good;
            }
            --total;
          }
          return k;
        } else {
          return detail::sample_from_map(f.weights, rng);
        }
      },
      family_);
}

/// Closed-form moments from the factorial moments.
inline MomentSet moments(const CountLaw& law) {
  double f1 = law.factorial_moment(1), f2 = law.factorial_moment(2), f3 = law.factorial_moment(3);
  MomentSet m;
  m.mean = f1;
  m.m2 = f2 + f1;
  m.m3 = f3 + 3.0 * f2 + f1;
  m.variance = m.m2 - f1 * f1;
  m.m3abs = m.m3;
  m.m2sgn = m.m2;
  m.m1abs = f1;
  // E|N-1| = E[N] - 1 + 2 P(N = 0)
  m.m1absdev1 = f1 - 1.0 + 2.0 * law.pmf(0);
  return m;
}

struct SupportRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  double tail_mass = 0.0;  // mass strictly above hi
};

/// Smallest prefix [lo, K] of the support whose mass is at least 1 - tail_eps.
/// Finite pmfs return their full support. Tail masses are summed from the far
/// end so that tail_eps well below machine epsilon is honoured.
inline SupportRange truncated_support(const CountLaw& law, double tail_eps = kDefaultTailEps) {
  if (!(tail_eps > 0.0 && tail_eps < 1.0))
    throw std::invalid_argument("truncated_support: tail_eps must lie in (0,1)");
  std::int64_t lo = law.support_min();
  if (law.as<FinitePmf>()) return {lo, law.support_max(), 0.0};

  std::vector<double> p;
  std::int64_t cap = law.support_max();
  if (cap == INT64_MAX) {
    // Extend until terms are negligible relative to tail_eps and decreasing.
    double mean = law.factorial_moment(1);
    double sd = std::sqrt(std::max(moments(law).variance, 1.0));
    double floor = tail_eps * 1e-30;
    for (std::int64_t k = lo;; ++k) {
      double v = law.pmf(k);
      p.push_back(v);
      double kd = static_cast<double>(k);
      if (kd > mean + 10.0 * sd && (v < floor || v == 0.0)) break;
      if (p.size() > 50'000'000) throw std::runtime_error("truncated_support: support too large");
    }
  } else {
    p.reserve(static_cast<std::size_t>(cap - lo + 1));
    for (std::int64_t k = lo; k <= cap; ++k) p.push_back(law.pmf(k));
  }
  // suffix[i] = mass of the support points at table index >= i
  std::vector<double> suffix(p.size() + 1, 0.0);
  for (std::size_t i = p.size(); i-- > 0;) suffix[i] = suffix[i + 1] + p[i];
  std::size_t cut = 0;
  while (suffix[cut + 1] > tail_eps) ++cut;
  double above = suffix[cut + 1];
  return {lo, lo + static_cast<std::int64_t>(cut), above};
}

/// Step-1 table of a count law over its truncated support.
inline LatticePmf tabulate(const CountLaw& law, double tail_eps = kDefaultTailEps) {
  SupportRange r = truncated_support(law, tail_eps);
  LatticePmf out;
  out.step = 1.0;
  out.origin = r.lo;
  out.weights.reserve(static_cast<std::size_t>(r.hi - r.lo + 1));
  for (std::int64_t k = r.lo; k <= r.hi; ++k) out.weights.push_back(law.pmf(k));
  out.truncation_mass = r.tail_mass;
  return out;
}

// ---------------------------------------------------------------------------
// Claim laws
// ---------------------------------------------------------------------------

/// Law of a single summand: finitely supported on a lattice {k * step}.
class ClaimLaw {
 public:
  enum class Kind { bernoulli, finite_int, lattice };

  static ClaimLaw bernoulli(double p) {
    if (!detail::is_probability(p)) throw std::invalid_argument("bernoulli: p must lie in [0,1]");
    std::map<std::int64_t, double> w;
    if (p < 1.0) w[0] = 1.0 - p;
    if (p > 0.0) w[1] = p;
    return ClaimLaw(Kind::bernoulli, w, 1.0, p);
  }
  static ClaimLaw finite_int(std::map<std::int64_t, double> w) {
    detail::validate_weights(w, "finite_int claim pmf");
    if (w.begin()->first < 0)
      throw std::invalid_argument("finite_int claim pmf: support must be non-negative");
    return ClaimLaw(Kind::finite_int, std::move(w), 1.0, 0.0);
  }
  /// Support points k * step, k possibly negative.
  static ClaimLaw lattice(std::map<std::int64_t, double> w, double step = 1.0) {
    detail::validate_weights(w, "lattice claim pmf");
    if (!(step > 0.0 && std::isfinite(step)))
      throw std::invalid_argument("lattice claim pmf: step must be positive");
    return ClaimLaw(Kind::lattice, std::move(w), step, 0.0);
  }
  static ClaimLaw rademacher(double scale = 1.0) { return lattice({{-1, 0.5}, {1, 0.5}}, scale); }
  static ClaimLaw constant(std::int64_t c) { return finite_int({{c, 1.0}}); }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const LatticePmf& table() const { return table_; }
  [[nodiscard]] double step() const { return table_.step; }
  [[nodiscard]] bool non_negative() const { return table_.origin >= 0; }
  /// Supported on the integer lattice (step 1).
  [[nodiscard]] bool integer_valued() const { return table_.step == 1.0; }
  [[nodiscard]] double bernoulli_p() const { return bernoulli_p_; }

  [[nodiscard]] double pmf(double x) const {
    double k = x / table_.step;
    double kr = std::round(k);
    if (std::fabs(k - kr) > 1e-9) return 0.0;
    return table_.at_index(static_cast<std::int64_t>(kr));
  }

  [[nodiscard]] double sample(Engine& rng) const {
    double u = uniform_open(rng);
    for (std::size_t i = 0; i < cdf_.size(); ++i)
      if (u <= cdf_[i]) return table_.value(i);
    return table_.back_value();
  }

  /// Sum of n independent draws.
  [[nodiscard]] double sample_sum(std::int64_t n, Engine& rng) const {
    if (n <= 0) return 0.0;
    if (kind_ == Kind::bernoulli)
      return static_cast<double>(std::binomial_distribution<std::int64_t>(n, bernoulli_p_)(rng));
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += sample(rng);
    return s;
  }

  [[nodiscard]] std::string name() const {
    char buf[64];
    if (kind_ == Kind::bernoulli) {
      std::snprintf(buf, sizeof buf, "bernoulli(p=%.10g)", bernoulli_p_);
      return buf;
    }
    std::string s = kind_ == Kind::finite_int ? "finite_int(" : "lattice(";
    if (kind_ == Kind::lattice) {
      std::snprintf(buf, sizeof buf, "step=%.10g;", table_.step);
      s += buf;
    }
    bool first = true;
    for (std::size_t i = 0; i < table_.size(); ++i) {
      if (table_.weights[i] == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%s%lld:%.10g", first ? "" : ";",
                    static_cast<long long>(table_.index(i)), table_.weights[i]);
      s += buf;
      first = false;
    }
    return s + ")";
  }

 private:
  ClaimLaw(Kind kind, const std::map<std::int64_t, double>& w, double step, double p)
      : kind_(kind), table_(LatticePmf::from_map(w, step)), bernoulli_p_(p) {
    table_.trim();
    double c = 0.0;
    for (double v : table_.weights) cdf_.push_back(c += v);
  }

  Kind kind_;
  LatticePmf table_;
  std::vector<double> cdf_;
  double bernoulli_p_;
};

inline double pmf(const CountLaw& law, std::int64_t k) { return law.pmf(k); }
inline double pmf(const ClaimLaw& law, double x) { return law.pmf(x); }

/// Moments of a claim law by finite summation over its support.
inline MomentSet moments(const ClaimLaw& law) {
  const LatticePmf& t = law.table();
  MomentSet m;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double x = t.value(i), w = t.weights[i];
    m.mean += w * x;
    m.m2 += w * x * x;
    m.m3 += w * x * x * x;
    m.m3abs += w * std::fabs(x) * x * x;
    m.m2sgn += w * x * x * sgn(x);
    m.m1abs += w * std::fabs(x);
    m.m1absdev1 += w * std::fabs(x - 1.0);
  }
  double v = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double d = t.value(i) - m.mean;
    v += t.weights[i] * d * d;
  }
  m.variance = v;
  return m;
}

}  // namespace rsum
