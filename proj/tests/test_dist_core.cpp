#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "rsum/dist_core.hpp"

using namespace rsum;

namespace {

// Simpson's rule for the negative binomial pmf as a Poisson mixture over a
// gamma(shape r, scale theta) mixing density.
double mixed_poisson_pmf_quadrature(double r, double p, int k) {
  double theta = (1.0 - p) / p;
  double hi = r * theta + 60.0 * std::sqrt(r) * theta + 60.0;
  const int n = 200000;
  double h = hi / n, s = 0.0;
  for (int i = 0; i <= n; ++i) {
    double l = i * h;
    double f = 0.0;
    if (l > 0.0)
      f = std::exp(-l + k * std::log(l) - std::lgamma(k + 1.0) + (r - 1.0) * std::log(l) - l / theta -
                   std::lgamma(r) - r * std::log(theta));
    else if (k == 0 && r == 1.0)
      f = 1.0 / theta;
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * f;
  }
  return s * h / 3.0;
}

MomentSet brute_moments(const CountLaw& law, double eps) {
  SupportRange r = truncated_support(law, eps);
  MomentSet m;
  for (std::int64_t k = r.lo; k <= r.hi; ++k) {
    double p = law.pmf(k), x = static_cast<double>(k);
    m.mean += p * x;
    m.m2 += p * x * x;
    m.m3 += p * x * x * x;
  }
  m.variance = m.m2 - m.mean * m.mean;
  return m;
}

std::vector<CountLaw> count_zoo() {
  return {CountLaw::poisson(0.3),  CountLaw::poisson(2.0),        CountLaw::poisson(40.0),
          CountLaw::binomial(10, 0.5), CountLaw::binomial(37, 0.13),
          CountLaw::gamma_mixed_poisson(2.0, 0.5), CountLaw::gamma_mixed_poisson(7.5, 0.3),
          CountLaw::hypergeometric(50, 10, 20), CountLaw::hypergeometric(30, 25, 7),
          CountLaw::finite({{0, 0.2}, {3, 0.5}, {8, 0.3}})};
}

}  // namespace

TEST(CountPmf, PoissonAtZero) { EXPECT_NEAR(pmf(CountLaw::poisson(2.0), 0), 0.1353352832366127, 1e-15); }

TEST(ClaimPmf, BernoulliAtOne) { EXPECT_DOUBLE_EQ(pmf(ClaimLaw::bernoulli(0.3), 1.0), 0.3); }

TEST(CountPmf, GammaMixedPoissonMatchesMixtureIntegral) {
  CountLaw nb = CountLaw::gamma_mixed_poisson(2.0, 0.5);
  EXPECT_NEAR(nb.pmf(0), 0.25, 1e-14);
  for (int k : {0, 1, 2, 5, 11}) EXPECT_NEAR(nb.pmf(k), mixed_poisson_pmf_quadrature(2.0, 0.5, k), 1e-9) << k;
  CountLaw nb2 = CountLaw::gamma_mixed_poisson(3.7, 0.35);
  for (int k : {0, 3, 9}) EXPECT_NEAR(nb2.pmf(k), mixed_poisson_pmf_quadrature(3.7, 0.35, k), 1e-9) << k;
}

TEST(CountPmf, OutOfSupportIsZero) {
  EXPECT_EQ(CountLaw::binomial(5, 0.3).pmf(6), 0.0);
  EXPECT_EQ(CountLaw::poisson(1.0).pmf(-1), 0.0);
  EXPECT_EQ(ClaimLaw::bernoulli(0.3).pmf(2.0), 0.0);
}

TEST(Sample, BernoulliOneIsAlwaysOne) {
  Engine rng = make_stream(3, 0);
  ClaimLaw b = ClaimLaw::bernoulli(1.0);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(b.sample(rng), 1.0);
}

TEST(Sample, PoissonMeanWithinFourStandardErrors) {
  const double lambda = 3.5;
  const int n = 1'000'000;
  Engine rng = make_stream(11, 0);
  CountLaw law = CountLaw::poisson(lambda);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(law.sample(rng));
  double se = std::sqrt(lambda / n);
  EXPECT_LT(std::fabs(s / n - lambda), 4.0 * se);
}

TEST(Sample, FinitePmfOnlyProducesSupport) {
  Engine rng = make_stream(5, 1);
  CountLaw law = CountLaw::finite({{0, 0.5}, {3, 0.5}});
  std::set<std::int64_t> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(law.sample(rng));
  EXPECT_EQ(seen, (std::set<std::int64_t>{0, 3}));
}

TEST(Sample, ReproducibleGivenSeed) {
  Engine a = make_stream(42, 7), b = make_stream(42, 7), c = make_stream(42, 8);
  CountLaw law = CountLaw::gamma_mixed_poisson(3.0, 0.4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    auto x = law.sample(a);
    ASSERT_EQ(x, law.sample(b));
    differs = differs || x != law.sample(c);
  }
  EXPECT_TRUE(differs);
}

TEST(Moments, PoissonThirdMoment) {
  MomentSet m = moments(CountLaw::poisson(2.0));
  EXPECT_NEAR(m.m3, 22.0, 1e-12);
}

TEST(Moments, Rademacher) {
  MomentSet m = moments(ClaimLaw::rademacher());
  EXPECT_DOUBLE_EQ(m.mean, 0.0);
  EXPECT_DOUBLE_EQ(m.variance, 1.0);
  EXPECT_DOUBLE_EQ(m.m3abs, 1.0);
  EXPECT_DOUBLE_EQ(m.m2sgn, 0.0);
}

TEST(Moments, Bernoulli) {
  for (double p : {0.1, 0.5, 0.93}) {
    MomentSet m = moments(ClaimLaw::bernoulli(p));
    EXPECT_DOUBLE_EQ(m.m2, p);
    EXPECT_DOUBLE_EQ(m.m3, p);
    EXPECT_DOUBLE_EQ(m.m3abs, p);
    EXPECT_DOUBLE_EQ(m.m2sgn, p);
  }
}

TEST(Moments, SignOfZeroIsPositive) {
  EXPECT_EQ(sgn(0.0), 1.0);
  // X in {-1, 0}: E[X^2 sgn X] = -P(X=-1); the zero atom contributes 0 either way
  MomentSet m = moments(ClaimLaw::lattice({{-1, 0.4}, {0, 0.6}}));
  EXPECT_DOUBLE_EQ(m.m2sgn, -0.4);
}

TEST(Moments, ClaimInequalities) {
  for (const ClaimLaw& c : {ClaimLaw::lattice({{-3, 0.2}, {1, 0.5}, {4, 0.3}}), ClaimLaw::rademacher(2.5),
                            ClaimLaw::bernoulli(0.2), ClaimLaw::lattice({{-2, 0.7}, {5, 0.3}}, 0.5)}) {
    MomentSet m = moments(c);
    EXPECT_GE(m.m3abs, std::fabs(m.m3));
    EXPECT_GE(m.m2, m.variance);
    EXPECT_GE(m.variance, 0.0);
    EXPECT_GE(m.m1abs, std::fabs(m.mean));
  }
}

TEST(Moments, CountClosedFormsMatchBruteForce) {
  for (const CountLaw& law : count_zoo()) {
    MomentSet a = moments(law), b = brute_moments(law, 1e-18);
    EXPECT_NEAR(a.mean, b.mean, 1e-9 * b.mean) << law.name();
    EXPECT_NEAR(a.m2, b.m2, 1e-9 * b.m2) << law.name();
    EXPECT_NEAR(a.m3, b.m3, 1e-9 * b.m3) << law.name();
    double abs_dev1 = 0.0;
    SupportRange r = truncated_support(law, 1e-18);
    for (std::int64_t k = r.lo; k <= r.hi; ++k) abs_dev1 += law.pmf(k) * std::fabs(k - 1.0);
    EXPECT_NEAR(a.m1absdev1, abs_dev1, 1e-9 * std::max(1.0, abs_dev1)) << law.name();
  }
}

TEST(Moments, ClaimMomentsMatchBruteForce) {
  std::map<std::int64_t, double> w{{-2, 0.1}, {0, 0.25}, {1, 0.4}, {6, 0.25}};
  ClaimLaw c = ClaimLaw::lattice(w, 0.5);
  double mean = 0, m2 = 0, m3 = 0, m3abs = 0, m2sgn = 0, m1abs = 0, m1dev = 0;
  for (auto [k, p] : w) {
    double x = 0.5 * static_cast<double>(k);
    mean += p * x;
    m2 += p * x * x;
    m3 += p * x * x * x;
    m3abs += p * std::fabs(x * x * x);
    m2sgn += p * x * x * (x >= 0 ? 1 : -1);
    m1abs += p * std::fabs(x);
    m1dev += p * std::fabs(x - 1.0);
  }
  MomentSet m = moments(c);
  EXPECT_NEAR(m.mean, mean, 1e-14);
  EXPECT_NEAR(m.m2, m2, 1e-14);
  EXPECT_NEAR(m.m3, m3, 1e-13);
  EXPECT_NEAR(m.m3abs, m3abs, 1e-13);
  EXPECT_NEAR(m.m2sgn, m2sgn, 1e-14);
  EXPECT_NEAR(m.m1abs, m1abs, 1e-14);
  EXPECT_NEAR(m.m1absdev1, m1dev, 1e-14);
  EXPECT_NEAR(m.variance, m2 - mean * mean, 1e-14);
}

TEST(Moments, SampleMeanAndVarianceWithinFiveStandardErrors) {
  const int n = 1'000'000;
  std::vector<CountLaw> laws = {CountLaw::binomial(12, 0.3), CountLaw::gamma_mixed_poisson(2.5, 0.4),
                                CountLaw::hypergeometric(40, 15, 12), CountLaw::finite({{1, 0.3}, {4, 0.7}})};
  std::uint64_t stream = 0;
  for (const CountLaw& law : laws) {
    Engine rng = make_stream(2024, stream++);
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
      double x = static_cast<double>(law.sample(rng));
      s1 += x;
      s2 += x * x;
    }
    MomentSet m = moments(law);
    double mean = s1 / n, var = s2 / n - mean * mean;
    EXPECT_LT(std::fabs(mean - m.mean), 5.0 * std::sqrt(m.variance / n)) << law.name();
    // fourth central moment from an exact table for the variance's standard error
    SupportRange r = truncated_support(law, 1e-16);
    for (std::int64_t k = r.lo; k <= r.hi; ++k) {
      double d = static_cast<double>(k) - m.mean;
      s3 += law.pmf(k) * d * d * d * d;
    }
    s4 = std::sqrt((s3 - m.variance * m.variance) / n);
    EXPECT_LT(std::fabs(var - m.variance), 5.0 * s4) << law.name();
  }
  ClaimLaw c = ClaimLaw::lattice({{-3, 0.2}, {1, 0.5}, {4, 0.3}});
  Engine rng = make_stream(2024, 99);
  double s1 = 0;
  for (int i = 0; i < n; ++i) s1 += c.sample(rng);
  MomentSet m = moments(c);
  EXPECT_LT(std::fabs(s1 / n - m.mean), 5.0 * std::sqrt(m.variance / n));
}

TEST(TruncatedSupport, PointMass) {
  // a point mass at zero violates E[N] > 0, so it cannot be built as a count
  EXPECT_THROW(CountLaw::finite({{0, 1.0}}), std::invalid_argument);
  for (double eps : {0.3, 1e-12}) {
    SupportRange r = truncated_support(CountLaw::constant(4), eps);
    EXPECT_EQ(r.hi, 4);
    EXPECT_EQ(r.tail_mass, 0.0);
  }
}

TEST(TruncatedSupport, PoissonMatchesCumulativeSum) {
  for (double lambda : {1.0, 4.0, 25.0}) {
    for (double eps : {1e-12, 1e-6}) {
      // tail sums accumulated from far above the mode towards zero
      std::vector<double> p(400);
      p[0] = std::exp(-lambda);
      for (int k = 1; k < 400; ++k) p[k] = p[k - 1] * lambda / k;
      int K = 0;
      for (;; ++K) {
        double tail = 0.0;
        for (int j = 399; j > K; --j) tail += p[j];
        if (tail <= eps) break;
      }
      SupportRange r = truncated_support(CountLaw::poisson(lambda), eps);
      EXPECT_EQ(r.lo, 0);
      EXPECT_EQ(r.hi, K) << lambda << " " << eps;
    }
  }
}

TEST(TruncatedSupport, BinomialIsFullSupport) {
  SupportRange r = truncated_support(CountLaw::binomial(10, 0.5), 1e-12);
  EXPECT_EQ(r.lo, 0);
  EXPECT_EQ(r.hi, 10);
}

TEST(TruncatedSupport, MassInvariant) {
  for (const CountLaw& law : count_zoo()) {
    for (double eps : {1e-3, 1e-8, 1e-12}) {
      LatticePmf t = tabulate(law, eps);
      double s = t.total();
      EXPECT_GE(s, 1.0 - eps - 1e-14) << law.name();
      EXPECT_LE(s, 1.0 + 1e-12) << law.name();
    }
  }
}

TEST(Validation, RejectsBadParameters) {
  EXPECT_THROW(CountLaw::poisson(0.0), std::invalid_argument);
  EXPECT_THROW(CountLaw::binomial(0, 0.5), std::invalid_argument);
  EXPECT_THROW(CountLaw::binomial(5, 1.5), std::invalid_argument);
  EXPECT_THROW(CountLaw::gamma_mixed_poisson(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(CountLaw::hypergeometric(10, 11, 3), std::invalid_argument);
  EXPECT_THROW(CountLaw::finite({{0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(CountLaw::finite({{1, 0.5}, {2, 0.4}}), std::invalid_argument);
  EXPECT_THROW(ClaimLaw::finite_int({{-1, 0.5}, {1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(ClaimLaw::bernoulli(-0.1), std::invalid_argument);
}
