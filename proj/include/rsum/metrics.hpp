#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "rsum/lattice_pmf.hpp"
#include "rsum/special.hpp"
#include "rsum/transforms.hpp"

namespace rsum {

enum class DistanceKind { wasserstein, stoploss, tv };
enum class DistanceMethod { exact_pmf, empirical };

inline std::string_view to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::wasserstein: return "wasserstein";
    case DistanceKind::stoploss: return "stoploss";
    case DistanceKind::tv: return "tv";
  }
  return "?";
}

inline std::string_view to_string(DistanceMethod m) {
  return m == DistanceMethod::exact_pmf ? "exact_pmf" : "empirical";
}

struct DistanceEstimate {
  DistanceKind kind{};
  double value = 0.0;
  DistanceMethod method{};
  double error_bound = 0.0;
};

/// Target law for the continuous-distance routines.
struct NormalTarget {
  double mean;
  double sd;
};
struct GammaTarget {
  double shape;
  double rate;
};

// ---------------------------------------------------------------------------
// Wasserstein
// ---------------------------------------------------------------------------

inline double support_width(const LatticePmf& p) {
  return p.empty() ? 0.0 : p.back_value() - p.front_value();
}

/// d_W between two lattice laws: sum of gap * |F_p - F_q|. Truncated mass can
/// move the value by at most its mass times the span (plus one lattice step).
inline DistanceEstimate wasserstein_pmf_vs_pmf(const LatticePmf& p, const LatticePmf& q) {
  double v = quantile_coupling_expectation(p, q);
  double lo = std::min(p.front_value(), q.front_value());
  double hi = std::max(p.back_value(), q.back_value());
  double err = (p.truncation_mass + q.truncation_mass) * (hi - lo + std::max(p.step, q.step));
  return {DistanceKind::wasserstein, v, DistanceMethod::exact_pmf, err};
}

namespace detail {

// Integral over [a, b] of |c - Phi(x)|.
inline double abs_gap_to_phi(double a, double b, double c) {
  using special::normal_cdf_integral;
  auto signed_area = [&](double l, double r) {
    return c * (r - l) - (normal_cdf_integral(r) - normal_cdf_integral(l));
  };
  if (!(b > a)) return 0.0;
  double fa = special::normal_cdf(a), fb = special::normal_cdf(b);
  if (c <= fa) return -signed_area(a, b);
  if (c >= fb) return signed_area(a, b);
  double x = special::normal_quantile(c);
  x = std::clamp(x, a, b);
  return signed_area(a, x) - signed_area(x, b);
}

}  // namespace detail

/// Integral of |F - Phi| for a finitely supported law given as sorted atoms
/// in standardized units. Tails use the closed forms of the integrals of Phi
/// and 1 - Phi.
inline double wasserstein_atoms_vs_std_normal(std::span<const Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("wasserstein: empty sample");
  double total = special::normal_cdf_integral(atoms.front().x);
  double f = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    f += atoms[i].p;
    if (i + 1 < atoms.size()) total += detail::abs_gap_to_phi(atoms[i].x, atoms[i + 1].x, std::min(f, 1.0));
  }
  // Above the largest atom F is taken as 1; truncated mass is accounted for by callers.
  return total + special::normal_sf_integral(atoms.back().x);
}

/// d_W between the law of (Y - mean)/sd for lattice Y and N(0,1).
inline DistanceEstimate wasserstein_pmf_vs_normal(const LatticePmf& y, NormalTarget t) {
  if (!(t.sd > 0.0)) throw std::invalid_argument("wasserstein: sd must be positive");
  std::vector<Atom> a = atoms_of(y);
  for (auto& at : a) at.x = (at.x - t.mean) / t.sd;
  double v = wasserstein_atoms_vs_std_normal(a);
  double span = a.back().x - a.front().x;
  return {DistanceKind::wasserstein, v, DistanceMethod::exact_pmf, y.truncation_mass * (span + 1.0)};
}

/// d_W between the empirical law of (samples - mean)/sd and N(0,1), integrated
/// exactly between order statistics. The error band is the 99.9% DKW radius
/// times the standardized sample range (a heuristic, not a guarantee).
inline DistanceEstimate wasserstein_empirical_vs_normal(std::vector<double> samples, double mean, double sd) {
  if (samples.empty()) throw std::invalid_argument("wasserstein_empirical_vs_normal: empty sample");
  if (!(sd > 0.0)) throw std::invalid_argument("wasserstein_empirical_vs_normal: sd must be positive");
  std::sort(samples.begin(), samples.end());
  double w = 1.0 / static_cast<double>(samples.size());
  std::vector<Atom> a;
  a.reserve(samples.size());
  for (double s : samples) {
    double z = (s - mean) / sd;
    if (!a.empty() && a.back().x == z)
      a.back().p += w;
    else
      a.push_back({z, w});
  }
  double v = wasserstein_atoms_vs_std_normal(a);
  double n = static_cast<double>(samples.size());
  double dkw = std::sqrt(std::log(2.0 / 1e-3) / (2.0 * n));
  double range = a.back().x - a.front().x;
  return {DistanceKind::wasserstein, v, DistanceMethod::empirical, dkw * range};
}

// ---------------------------------------------------------------------------
// Stop-loss
// ---------------------------------------------------------------------------

/// E(Y - a)_+ for a finitely supported law, evaluated at sorted retentions.
class StopLossCurve {
 public:
  explicit StopLossCurve(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    std::sort(atoms_.begin(), atoms_.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
    tail_p_.assign(atoms_.size() + 1, 0.0);
    tail_px_.assign(atoms_.size() + 1, 0.0);
    for (std::size_t i = atoms_.size(); i-- > 0;) {
      tail_p_[i] = tail_p_[i + 1] + atoms_[i].p;
      tail_px_[i] = tail_px_[i + 1] + atoms_[i].p * atoms_[i].x;
    }
  }
  [[nodiscard]] double operator()(double a) const {
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), a, [](double v, const Atom& at) { return v < at.x; });
    std::size_t i = static_cast<std::size_t>(it - atoms_.begin());
    return tail_px_[i] - a * tail_p_[i];
  }
  [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  std::vector<Atom> atoms_;
  std::vector<double> tail_p_, tail_px_;
};

inline constexpr std::size_t kStopLossGridPoints = 4096;

namespace detail {

// Half uniform, half geometric (clustered at lo) grid on [lo, hi].
inline std::vector<double> hybrid_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g;
  std::size_t half = points / 2;
  for (std::size_t i = 0; i < half; ++i)
    g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(half - 1));
  double width = hi - lo;
  double first = width * 1e-6;
  for (std::size_t i = 0; i < points - half; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(points - half - 1);
    g.push_back(lo + first * std::pow(width / first, t));
  }
  std::sort(g.begin(), g.end());
  return g;
}

inline DistanceEstimate stoploss_sup(const StopLossCurve& y, auto&& target_sl, double lo, double hi,
                                     DistanceMethod method, double extra_err, std::size_t points) {
  std::vector<double> grid = hybrid_grid(lo, hi, points);
  double best = 0.0;
  for (double a : grid) best = std::max(best, std::fabs(y(a) - target_sl(a)));
  // Both curves are 1-Lipschitz in a, so the difference is 2-Lipschitz and the
  // sup between grid points exceeds the grid max by at most one step.
  double step = (hi - lo) / static_cast<double>(points / 2 - 1);
  return {DistanceKind::stoploss, best, method, step + extra_err};
}

inline double atoms_quantile(const std::vector<Atom>& atoms, double p) {
  double c = 0.0;
  for (const auto& a : atoms) {
    c += a.p;
    if (c >= p) return a.x;
  }
  return atoms.back().x;
}

}  // namespace detail

/// sup_a |E(Y - a)_+ - E(Z - a)_+| for Z ~ Gamma(shape, rate), over a ∈ [0, q]
/// where q is the 0.9999 quantile of the wider law.
inline DistanceEstimate stoploss_distance(const StopLossCurve& y, GammaTarget g,
                                          DistanceMethod method = DistanceMethod::exact_pmf,
                                          double truncation_mass = 0.0,
                                          std::size_t points = kStopLossGridPoints) {
  double hi = std::max(special::gamma_quantile(g.shape, g.rate, 0.9999),
                       detail::atoms_quantile(y.atoms(), 0.9999));
  auto target = [&](double a) { return special::gamma_stoploss(g.shape, g.rate, a); };
  double span = y.atoms().back().x - std::min(0.0, y.atoms().front().x);
  return detail::stoploss_sup(y, target, 0.0, hi, method, truncation_mass * (span + 1.0), points);
}

/// Same for a normal target; the retention range covers both laws' central 0.9998 mass.
inline DistanceEstimate stoploss_distance(const StopLossCurve& y, NormalTarget t,
                                          DistanceMethod method = DistanceMethod::exact_pmf,
                                          double truncation_mass = 0.0,
                                          std::size_t points = kStopLossGridPoints) {
  double zq = special::normal_quantile(0.9999);
  double lo = std::min(t.mean - zq * t.sd, detail::atoms_quantile(y.atoms(), 1e-4));
  double hi = std::max(t.mean + zq * t.sd, detail::atoms_quantile(y.atoms(), 0.9999));
  auto target = [&](double a) { return special::normal_stoploss(t.mean, t.sd, a); };
  double span = y.atoms().back().x - y.atoms().front().x;
  return detail::stoploss_sup(y, target, lo, hi, method, truncation_mass * (span + 1.0), points);
}

inline DistanceEstimate stoploss_distance(const LatticePmf& y, GammaTarget g) {
  return stoploss_distance(StopLossCurve(atoms_of(y)), g, DistanceMethod::exact_pmf, y.truncation_mass);
}
inline DistanceEstimate stoploss_distance(const LatticePmf& y, NormalTarget t) {
  return stoploss_distance(StopLossCurve(atoms_of(y)), t, DistanceMethod::exact_pmf, y.truncation_mass);
}

/// Empirical version: each sample is an atom of mass 1/n; the Monte Carlo band
/// 3 sd(Y) / sqrt(n) is added to the grid error.
inline DistanceEstimate stoploss_distance_empirical(std::span<const double> samples, GammaTarget g) {
  if (samples.empty()) throw std::invalid_argument("stoploss_distance_empirical: empty sample");
  double n = static_cast<double>(samples.size());
  std::vector<Atom> a;
  double m = 0.0, m2 = 0.0;
  for (double s : samples) {
    a.push_back({s, 1.0 / n});
    m += s / n;
    m2 += s * s / n;
  }
  DistanceEstimate d = stoploss_distance(StopLossCurve(std::move(a)), g, DistanceMethod::empirical);
  d.error_bound += 3.0 * std::sqrt(std::max(0.0, m2 - m * m) / n);
  return d;
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

/// (1/2) sum |p_k - q_k| on a common integer lattice.
inline DistanceEstimate tv_pmf(const LatticePmf& p, const LatticePmf& q) {
  if (p.step != 1.0 || q.step != 1.0) throw std::invalid_argument("tv_pmf: laws must live on the integers");
  std::int64_t lo = std::min(p.origin, q.origin);
  std::int64_t hi = std::max(p.index(p.size() - 1), q.index(q.size() - 1));
  double s = 0.0;
  for (std::int64_t k = lo; k <= hi; ++k) s += std::fabs(p.at_index(k) - q.at_index(k));
  return {DistanceKind::tv, 0.5 * s, DistanceMethod::exact_pmf, p.truncation_mass + q.truncation_mass};
}

}  // namespace rsum
