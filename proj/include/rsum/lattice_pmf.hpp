#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsum {

/// Probability mass function on the lattice {(origin + i) * step : i = 0..size-1}.
///
/// `truncation_mass` is the probability that was dropped when the law was
/// tabulated (tail truncation of an unbounded count law). The stored weights
/// sum to 1 - truncation_mass.
struct LatticePmf {
  double step = 1.0;
  std::int64_t origin = 0;
  std::vector<double> weights;
  double truncation_mass = 0.0;

  [[nodiscard]] std::size_t size() const { return weights.size(); }
  [[nodiscard]] bool empty() const { return weights.empty(); }
  [[nodiscard]] std::int64_t index(std::size_t i) const {
    return origin + static_cast<std::int64_t>(i);
  }
  [[nodiscard]] double value(std::size_t i) const {
    return static_cast<double>(index(i)) * step;
  }
  [[nodiscard]] double front_value() const { return value(0); }
  [[nodiscard]] double back_value() const { return value(size() - 1); }

  /// Mass at lattice index k (0 outside the table).
  [[nodiscard]] double at_index(std::int64_t k) const {
    if (k < origin || k >= origin + static_cast<std::int64_t>(size())) return 0.0;
    return weights[static_cast<std::size_t>(k - origin)];
  }

  [[nodiscard]] double total() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  /// Raw moment E[X^k] over the stored weights (not renormalized).
  [[nodiscard]] double moment(int k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += weights[i] * std::pow(value(i), k);
    return s;
  }

  [[nodiscard]] double mean() const { return moment(1); }

  [[nodiscard]] double variance() const {
    double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double d = value(i) - m;
      s += weights[i] * d * d;
    }
    return s;
  }

  /// Drop zero-weight entries at both ends.
  void trim() {
    std::size_t lo = 0;
    while (lo < weights.size() && weights[lo] == 0.0) ++lo;
    if (lo == weights.size()) {
      weights.clear();
      origin = 0;
      return;
    }
    std::size_t hi = weights.size();
    while (weights[hi - 1] == 0.0) --hi;
    weights = std::vector<double>(weights.begin() + static_cast<std::ptrdiff_t>(lo),
                                  weights.begin() + static_cast<std::ptrdiff_t>(hi));
    origin += static_cast<std::int64_t>(lo);
  }

  static LatticePmf point_mass(std::int64_t k, double step = 1.0) {
    return LatticePmf{step, k, {1.0}, 0.0};
  }

  /// Build from (index -> weight) pairs.
  static LatticePmf from_map(const std::map<std::int64_t, double>& m, double step = 1.0) {
    if (m.empty()) throw std::invalid_argument("LatticePmf: empty support");
    LatticePmf p;
    p.step = step;
    p.origin = m.begin()->first;
    p.weights.assign(static_cast<std::size_t>(m.rbegin()->first - p.origin + 1), 0.0);
    for (auto [k, w] : m) p.weights[static_cast<std::size_t>(k - p.origin)] += w;
    return p;
  }
};

/// A finitely supported law on the real line as sorted (value, mass) atoms.
struct Atom {
  double x;
  double p;
};

inline std::vector<Atom> atoms_of(const LatticePmf& pmf) {
  std::vector<Atom> out;
  out.reserve(pmf.size());
  for (std::size_t i = 0; i < pmf.size(); ++i)
    if (pmf.weights[i] != 0.0) out.push_back({pmf.value(i), pmf.weights[i]});
  return out;
}

namespace detail {

inline void require_same_step(const LatticePmf& a, const LatticePmf& b, const char* what) {
  if (std::fabs(a.step - b.step) > 1e-12 * std::max(std::fabs(a.step), std::fabs(b.step)))
    throw std::invalid_argument(std::string(what) + ": lattice steps differ");
}

}  // namespace detail

/// Law of the sum of independent variables with laws a and b.
inline LatticePmf convolve(const LatticePmf& a, const LatticePmf& b) {
  detail::require_same_step(a, b, "convolve");
  if (a.empty() || b.empty()) return LatticePmf{a.step, 0, {}, 1.0};
  LatticePmf out;
  out.step = a.step;
  out.origin = a.origin + b.origin;
  out.weights.assign(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double wa = a.weights[i];
    if (wa == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out.weights[i + j] += wa * b.weights[j];
  }
  double ta = a.truncation_mass, tb = b.truncation_mass;
  out.truncation_mass = ta + tb - ta * tb;
  return out;
}

/// Weighted mixture sum_i w_i * pmf_i. Truncation masses combine with the same weights.
inline LatticePmf mixture(std::span<const std::pair<double, const LatticePmf*>> parts) {
  if (parts.empty()) throw std::invalid_argument("mixture: no components");
  double step = parts.front().second->step;
  std::int64_t lo = INT64_MAX, hi = INT64_MIN;
  for (auto [w, p] : parts) {
    detail::require_same_step(*parts.front().second, *p, "mixture");
    if (w == 0.0 || p->empty()) continue;
    lo = std::min(lo, p->origin);
    hi = std::max(hi, p->origin + static_cast<std::int64_t>(p->size()) - 1);
  }
  LatticePmf out;
  out.step = step;
  if (lo > hi) return out;
  out.origin = lo;
  out.weights.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (auto [w, p] : parts) {
    out.truncation_mass += w * p->truncation_mass;
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < p->size(); ++i)
      out.weights[static_cast<std::size_t>(p->index(i) - lo)] += w * p->weights[i];
  }
  return out;
}

inline LatticePmf mixture2(double wa, const LatticePmf& a, double wb, const LatticePmf& b) {
  std::pair<double, const LatticePmf*> parts[] = {{wa, &a}, {wb, &b}};
  return mixture(parts);
}

/// Law of X + shift (shift in lattice units).
inline LatticePmf shifted(LatticePmf p, std::int64_t shift) {
  p.origin += shift;
  return p;
}

/// Law of the product M * X for independent integer-valued M >= 0 (given as a
/// step-1 table) and lattice X. The result lives on X's lattice.
inline LatticePmf product_law(const LatticePmf& m, const LatticePmf& x) {
  if (m.step != 1.0 || m.origin < 0) throw std::invalid_argument("product_law: multiplier must be a non-negative integer table");
  if (m.empty() || x.empty()) return LatticePmf{x.step, 0, {}, 1.0};
  std::int64_t mmax = m.origin + static_cast<std::int64_t>(m.size()) - 1;
  std::int64_t xlo = x.origin, xhi = x.origin + static_cast<std::int64_t>(x.size()) - 1;
  std::int64_t lo = std::min({std::int64_t{0}, m.origin * xlo, mmax * xlo});
  std::int64_t hi = std::max({std::int64_t{0}, m.origin * xhi, mmax * xhi});
  LatticePmf out;
  out.step = x.step;
  out.origin = lo;
  out.weights.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (std::size_t a = 0; a < m.size(); ++a) {
    double wm = m.weights[a];
    if (wm == 0.0) continue;
    std::int64_t n = m.index(a);
    for (std::size_t b = 0; b < x.size(); ++b)
      out.weights[static_cast<std::size_t>(n * x.index(b) - lo)] += wm * x.weights[b];
  }
  out.trim();
  out.truncation_mass = m.truncation_mass + x.truncation_mass;
  return out;
}

/// Two-column text table: support point, probability.
inline void write_table(std::ostream& os, const LatticePmf& pmf) {
  char buf[96];
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf.weights[i] == 0.0) continue;
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\n", pmf.value(i), pmf.weights[i]);
    os << buf;
  }
}

}  // namespace rsum
