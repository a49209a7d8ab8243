#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rsum/dist_core.hpp"
#include "rsum/lattice_pmf.hpp"

// Size, zero, generalized-zero and non-zero biasing of lattice laws.
//
// Size bias is realized exactly as a pmf. The three zero-type biases of a
// lattice law are absolutely continuous, and the bounds only consume E|.| of
// them, so they are exposed as closed-form moment functionals.

namespace rsum {

enum class BiasKind { size, zero, generalized_zero, non_zero };

struct BiasedLaw {
  BiasKind kind;
  std::optional<LatticePmf> pmf;  // size bias only
  double abs_mean = 0.0;          // E|X^b|
};

/// Size-biased reweighting j p(j) / E[X] of a non-negative lattice pmf.
/// The result is renormalized over the stored support.
inline LatticePmf size_bias(const LatticePmf& p) {
  if (!p.empty() && p.origin < 0)
    throw std::invalid_argument("size_bias: law must be non-negative");
  LatticePmf out = p;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.weights[i] = p.value(i) * p.weights[i];
    s += out.weights[i];
  }
  if (!(s > 0.0)) throw std::invalid_argument("size_bias: law must have positive mean");
  for (double& w : out.weights) w /= s;
  out.trim();
  // Mass of the size-biased law sitting beyond the table is not recoverable
  // from the table alone; report the input's truncation as a lower estimate.
  out.truncation_mass = p.truncation_mass;
  return out;
}

inline LatticePmf size_bias_pmf(const ClaimLaw& claim) {
  if (!claim.non_negative()) throw std::invalid_argument("size_bias_pmf: claim must be non-negative");
  return size_bias(claim.table());
}

/// Size-biased count N^s over the truncated support of N, weighted by the
/// exact mean so that the lost tail mass is reported.
inline LatticePmf size_bias_pmf(const CountLaw& count, double tail_eps = kDefaultTailEps) {
  LatticePmf t = tabulate(count, tail_eps);
  double mean = count.factorial_moment(1);
  double kept = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.weights[i] *= t.value(i) / mean;
    kept += t.weights[i];
  }
  t.truncation_mass = std::max(0.0, 1.0 - kept);
  t.trim();
  return t;
}

/// Law of N^s - 1. For Poisson counts this is the law of N itself.
inline LatticePmf size_bias_minus_one_pmf(const CountLaw& count, double tail_eps = kDefaultTailEps) {
  if (count.is_poisson()) return tabulate(count, tail_eps);
  return shifted(size_bias_pmf(count, tail_eps), -1);
}

/// E|A - B| under the comonotone (quantile) coupling of two finitely
/// supported laws: the integral of |F_A - F_B| over the merged support.
inline double quantile_coupling_expectation(const std::vector<Atom>& a, const std::vector<Atom>& b) {
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, total = 0.0;
  double prev = 0.0;
  bool started = false;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i].x <= b[j].x))
      x = a[i].x;
    else
      x = b[j].x;
    if (started) total += (x - prev) * std::fabs(fa - fb);
    while (i < a.size() && a[i].x == x) fa += a[i++].p;
    while (j < b.size() && b[j].x == x) fb += b[j++].p;
    prev = x;
    started = true;
  }
  return total;
}

inline double quantile_coupling_expectation(const LatticePmf& a, const LatticePmf& b) {
  return quantile_coupling_expectation(atoms_of(a), atoms_of(b));
}

/// E|N + 1 - N^s| under the quantile coupling, computed from truncated tables.
inline double coupling_delta_count_exact(const CountLaw& count, double tail_eps = kDefaultTailEps) {
  return quantile_coupling_expectation(shifted(tabulate(count, tail_eps), 1),
                                       size_bias_pmf(count, tail_eps));
}

/// E|N + 1 - N^s| under the quantile coupling. Families with a known stochastic
/// ordering between N + 1 and N^s use the closed form.
inline double coupling_delta_count(const CountLaw& count, double tail_eps = kDefaultTailEps) {
  if (count.is_poisson()) return 0.0;
  if (auto* b = count.as<Binomial>()) return b->p;
  if (auto* g = count.as<GammaMixedPoisson>()) return g->mixing_variance() / g->mixing_mean();
  if (count.as<Hypergeometric>()) {
    MomentSet m = moments(count);
    return 1.0 + m.mean - m.m2 / m.mean;
  }
  return coupling_delta_count_exact(count, tail_eps);
}

/// E|X^z| = E|X|^3 / (2 Var X) for mean-zero X.
inline double abs_mean_zero_bias(const ClaimLaw& claim) {
  MomentSet m = moments(claim);
  if (std::fabs(m.mean) > 1e-12) throw std::invalid_argument("abs_mean_zero_bias: claim mean must be zero");
  if (!(m.variance > 0.0)) throw std::invalid_argument("abs_mean_zero_bias: claim variance must be positive");
  return m.m3abs / (2.0 * m.variance);
}

/// E|X^gz| = E|X|^3 / (2 E[X^2]).
inline double abs_mean_gz(const ClaimLaw& claim) {
  MomentSet m = moments(claim);
  if (!(m.m2 > 0.0)) throw std::invalid_argument("abs_mean_gz: E[X^2] must be positive");
  return m.m3abs / (2.0 * m.m2);
}

/// E|(N X)^nz| for N ~ Po(lambda) independent of X.
inline double abs_mean_nz_product(double lambda, const ClaimLaw& claim) {
  if (!(lambda > 0.0)) throw std::invalid_argument("abs_mean_nz_product: lambda must be positive");
  MomentSet m = moments(claim);
  double den = 2.0 * (m.m2 + lambda * m.variance);
  if (!(den > 0.0)) throw std::invalid_argument("abs_mean_nz_product: Var(N X) must be positive");
  double num = (lambda * lambda + 3.0 * lambda + 1.0) * m.m3abs -
               lambda * (lambda + 1.0) * m.mean * m.m2sgn;
  return num / den;
}

/// CDF of X^gz for a non-negative lattice claim, evaluated at lattice points
/// 0, h, 2h, ..., max. Between them the CDF is linear (the density
/// E[X; X > x] / E[X^2] is constant on each cell).
inline std::vector<double> gz_cdf_at_lattice(const ClaimLaw& claim) {
  const LatticePmf& t = claim.table();
  if (!claim.non_negative()) throw std::invalid_argument("gz_cdf_at_lattice: claim must be non-negative");
  MomentSet m = moments(claim);
  if (!(m.m2 > 0.0)) throw std::invalid_argument("gz_cdf_at_lattice: E[X^2] must be positive");
  std::int64_t kmax = t.index(t.size() - 1);
  std::vector<double> cdf(static_cast<std::size_t>(kmax) + 1, 0.0);
  double h = t.step;
  for (std::int64_t k = 0; k < kmax; ++k) {
    // E[X; X > x] for x in [k h, (k+1) h)
    double tail = 0.0;
    for (std::int64_t j = k + 1; j <= kmax; ++j) tail += static_cast<double>(j) * h * t.at_index(j);
    cdf[static_cast<std::size_t>(k + 1)] = cdf[static_cast<std::size_t>(k)] + h * tail / m.m2;
  }
  return cdf;
}

/// E|X^s - X^gz| under the quantile coupling, by exact piecewise integration
/// of |F_s - F_gz|: F_s is a step function and F_gz is linear on each cell.
inline double coupling_delta_claim(const ClaimLaw& claim) {
  if (!claim.non_negative()) throw std::invalid_argument("coupling_delta_claim: claim must be non-negative");
  if (claim.kind() == ClaimLaw::Kind::bernoulli) {
    if (!(claim.bernoulli_p() > 0.0)) throw std::invalid_argument("coupling_delta_claim: claim must have positive mean");
    return 0.5;
  }
  LatticePmf s = size_bias_pmf(claim);
  std::vector<double> g = gz_cdf_at_lattice(claim);
  double h = claim.step();
  double total = 0.0;
  double fs = 0.0;
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    fs += s.at_index(static_cast<std::int64_t>(k));
    double g0 = g[k] - fs, g1 = g[k + 1] - fs;
    if (g0 * g1 >= 0.0) {
      total += h * std::fabs(0.5 * (g0 + g1));
    } else {
      total += h * (g0 * g0 + g1 * g1) / (2.0 * std::fabs(g1 - g0));
    }
  }
  return total;
}

inline BiasedLaw bias(const ClaimLaw& claim, BiasKind kind) {
  switch (kind) {
    case BiasKind::size: {
      LatticePmf p = size_bias_pmf(claim);
      double am = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) am += std::fabs(p.value(i)) * p.weights[i];
      return {kind, std::move(p), am};
    }
    case BiasKind::zero:
      return {kind, std::nullopt, abs_mean_zero_bias(claim)};
    case BiasKind::generalized_zero:
      return {kind, std::nullopt, abs_mean_gz(claim)};
    case BiasKind::non_zero: {
      // E|X^nz| = E[(X - mu) X |X|] / (2 Var X)
      MomentSet m = moments(claim);
      if (!(m.variance > 0.0)) throw std::invalid_argument("bias: non-zero bias requires positive variance");
      const LatticePmf& t = claim.table();
      double s = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        double x = t.value(i);
        s += t.weights[i] * (x - m.mean) * x * std::fabs(x);
      }
      return {kind, std::nullopt, s / (2.0 * m.variance)};
    }
  }
  throw std::invalid_argument("bias: unknown kind");
}

}  // namespace rsum
