#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rsum/dist_core.hpp"
#include "rsum/lattice_pmf.hpp"
#include "rsum/rng.hpp"
#include "rsum/transforms.hpp"

namespace rsum {

/// Y = X_1 + ... + X_N where the X_j follow the equally-correlated mixture
/// model: with probability rho all summands equal one draw of X_1, otherwise
/// they are independent. N is independent of the summands.
struct RandomSumModel {
  CountLaw count;
  ClaimLaw claim;
  double rho = 0.0;

  RandomSumModel(CountLaw c, ClaimLaw x, double r) : count(std::move(c)), claim(std::move(x)), rho(r) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("model: rho must lie in [0,1]");
  }

  [[nodiscard]] RandomSumModel with_rho(double r) const { return {count, claim, r}; }
};

using ExactPmf = LatticePmf;

inline double sample_sum(const RandomSumModel& model, Engine& rng) {
  bool comonotone = model.rho > 0.0 && uniform_open(rng) <= model.rho;
  std::int64_t n = model.count.sample(rng);
  if (comonotone) return static_cast<double>(n) * model.claim.sample(rng);
  return model.claim.sample_sum(n, rng);
}

struct MeanVar {
  double mean;
  double variance;
};

/// E[Y] and Var(Y) using Cov(X_j, X_k) = rho Var(X_1):
/// Var(Y) = E[N] E[X^2] + E[N(N-1)] (rho Var X + E[X]^2) - (E[N] E[X])^2.
inline MeanVar mean_var(const RandomSumModel& model) {
  MomentSet x = moments(model.claim);
  double f1 = model.count.factorial_moment(1);
  double f2 = model.count.factorial_moment(2);
  double mean = f1 * x.mean;
  double var = f1 * x.m2 + f2 * (model.rho * x.variance + x.mean * x.mean) - mean * mean;
  return {mean, std::max(var, 0.0)};
}

/// Law of X_1 + ... + X_M for independent X_j ~ claim and M ~ count_table.
inline LatticePmf compound(const ClaimLaw& claim, const LatticePmf& count_table) {
  const LatticePmf& x = claim.table();
  LatticePmf power = LatticePmf::point_mass(0, x.step);
  std::int64_t nmax = count_table.empty() ? 0 : count_table.index(count_table.size() - 1);
  LatticePmf acc{x.step, 0, {}, 0.0};
  for (std::int64_t n = 0; n <= nmax; ++n) {
    if (n > 0) power = convolve(power, x);
    double w = count_table.at_index(n);
    if (w == 0.0) continue;
    if (acc.empty()) {
      acc = power;
      for (double& v : acc.weights) v *= w;
      acc.truncation_mass = 0.0;
    } else {
      acc = mixture2(1.0, acc, w, power);
    }
  }
  acc.truncation_mass = count_table.truncation_mass;
  return acc;
}

/// Exact law of Y: rho * law(N X_1) + (1 - rho) * compound law. Tail mass
/// dropped from the count table is reported as truncation_mass.
inline ExactPmf exact_pmf(const RandomSumModel& model, double tail_eps = kDefaultTailEps) {
  LatticePmf n = tabulate(model.count, tail_eps);
  LatticePmf indep = compound(model.claim, n);
  if (model.rho == 0.0) return indep;
  LatticePmf como = product_law(n, model.claim.table());
  if (model.rho == 1.0) return como;
  LatticePmf out = mixture2(model.rho, como, 1.0 - model.rho, indep);
  out.truncation_mass = n.truncation_mass;
  return out;
}

/// Size-biased law of Y by direct reweighting of exact_pmf.
inline ExactPmf exact_pmf_size_bias_lhs(const RandomSumModel& model, double tail_eps = kDefaultTailEps) {
  if (!model.claim.non_negative()) throw std::invalid_argument("size bias: claim must be non-negative");
  ExactPmf y = exact_pmf(model, tail_eps);
  MeanVar mv = mean_var(model);
  if (!(mv.mean > 0.0)) throw std::invalid_argument("size bias: E[Y] must be positive");
  ExactPmf out = y;
  double kept = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.weights[i] = y.value(i) * y.weights[i] / mv.mean;
    kept += out.weights[i];
  }
  out.truncation_mass = std::max(0.0, 1.0 - kept);
  out.trim();
  return out;
}

/// Size-biased law of Y built from the representation
///   Y^s = I_rho (N X_1)^s + (1 - I_rho) (X_1^s + sum_{j=1}^{N^s - 1} X'_j).
/// (N X_1)^s is realized as the product N^s X_1^s of independent size biases.
inline ExactPmf exact_pmf_size_bias_rhs(const RandomSumModel& model, double tail_eps = kDefaultTailEps) {
  if (!model.claim.non_negative()) throw std::invalid_argument("size bias: claim must be non-negative");
  LatticePmf xs = size_bias_pmf(model.claim);
  LatticePmf ns = size_bias_pmf(model.count, tail_eps);
  LatticePmf ns1 = shifted(ns, -1);
  LatticePmf indep = convolve(xs, compound(model.claim, ns1));
  if (model.rho == 0.0) return indep;
  LatticePmf como = product_law(ns, xs);
  if (model.rho == 1.0) return como;
  return mixture2(model.rho, como, 1.0 - model.rho, indep);
}

/// Poisson-count form: N^s - 1 has the law of N, so the independent branch is
/// X_1^s convolved with the law of Y at rho = 0.
inline ExactPmf exact_pmf_size_bias_rhs_poisson(const RandomSumModel& model,
                                                double tail_eps = kDefaultTailEps) {
  if (!model.count.is_poisson()) throw std::invalid_argument("size bias (Poisson form): count must be Poisson");
  LatticePmf xs = size_bias_pmf(model.claim);
  LatticePmf indep = convolve(xs, exact_pmf(model.with_rho(0.0), tail_eps));
  if (model.rho == 0.0) return indep;
  LatticePmf nx = product_law(tabulate(model.count, tail_eps), model.claim.table());
  LatticePmf como = size_bias(nx);
  return mixture2(model.rho, como, 1.0 - model.rho, indep);
}

// ---------------------------------------------------------------------------
// Moment-level forms of the zero-type representations.
//
// For W defined by E[g'(W)] = E[(X - c) g(X) - d g(0)] / D, taking
// g(x) = x^{j+1} / (j+1) gives E[W^j] = (E[X^{j+2}] - c E[X^{j+1}]) / ((j+1) D).
// ---------------------------------------------------------------------------

inline constexpr int kMaxBiasMomentOrder = 4;
using BiasMoments = std::array<double, kMaxBiasMomentOrder + 1>;  // orders 0..4

/// Moments of the non-zero bias (zero bias when the mean is zero).
inline BiasMoments nz_moments(const LatticePmf& p) {
  BiasMoments out{};
  double mu = p.mean();
  double var = p.variance();
  if (!(var > 0.0)) throw std::invalid_argument("nz_moments: variance must be positive");
  for (int j = 0; j <= kMaxBiasMomentOrder; ++j)
    out[j] = (p.moment(j + 2) - mu * p.moment(j + 1)) / ((j + 1) * var);
  return out;
}

/// Moments of the generalized-zero bias.
inline BiasMoments gz_moments(const LatticePmf& p) {
  BiasMoments out{};
  double m2 = p.moment(2);
  if (!(m2 > 0.0)) throw std::invalid_argument("gz_moments: E[X^2] must be positive");
  for (int j = 0; j <= kMaxBiasMomentOrder; ++j) out[j] = p.moment(j + 2) / ((j + 1) * m2);
  return out;
}

inline BiasMoments raw_moments(const LatticePmf& p) {
  BiasMoments out{};
  for (int j = 0; j <= kMaxBiasMomentOrder; ++j) out[j] = p.moment(j);
  return out;
}

/// Moments of U + V for independent U, V.
inline BiasMoments sum_moments(const BiasMoments& u, const BiasMoments& v) {
  BiasMoments out{};
  for (int j = 0; j <= kMaxBiasMomentOrder; ++j) {
    double s = 0.0, c = 1.0;
    for (int i = 0; i <= j; ++i) {
      s += c * u[i] * v[j - i];
      c = c * (j - i) / (i + 1);
    }
    out[j] = s;
  }
  return out;
}

inline BiasMoments mix_moments(double w, const BiasMoments& a, const BiasMoments& b) {
  BiasMoments out{};
  for (int j = 0; j <= kMaxBiasMomentOrder; ++j) out[j] = w * a[j] + (1.0 - w) * b[j];
  return out;
}

/// Moments of Y^z from its defining identity applied to the exact law of Y.
inline BiasMoments zero_bias_moments_direct(const RandomSumModel& model, double tail_eps) {
  return nz_moments(exact_pmf(model, tail_eps));
}

/// Moments of w (N X_1)^z + (1 - w) (X_1^z + sum_{j=1}^{N^s-1} X'_j).
inline BiasMoments zero_bias_moments_mixture(const RandomSumModel& model, double weight,
                                             double tail_eps) {
  LatticePmf n = tabulate(model.count, tail_eps);
  BiasMoments nx = nz_moments(product_law(n, model.claim.table()));
  BiasMoments xz = nz_moments(model.claim.table());
  BiasMoments rest = raw_moments(compound(model.claim, size_bias_minus_one_pmf(model.count, tail_eps)));
  return mix_moments(weight, nx, sum_moments(xz, rest));
}

/// Moments of Y^nz from its defining identity applied to the exact law of Y.
inline BiasMoments nonzero_bias_moments_direct(const RandomSumModel& model, double tail_eps) {
  return nz_moments(exact_pmf(model, tail_eps));
}

/// Moments of w (N X_1)^nz + (1 - w) (X_1^gz + sum_{j=1}^{N} X'_j), N Poisson.
inline BiasMoments nonzero_bias_moments_mixture(const RandomSumModel& model, double weight,
                                                double tail_eps) {
  if (!model.count.is_poisson()) throw std::invalid_argument("non-zero bias representation: count must be Poisson");
  LatticePmf n = tabulate(model.count, tail_eps);
  BiasMoments nx = nz_moments(product_law(n, model.claim.table()));
  BiasMoments xgz = gz_moments(model.claim.table());
  BiasMoments rest = raw_moments(compound(model.claim, n));
  return mix_moments(weight, nx, sum_moments(xgz, rest));
}

}  // namespace rsum
