#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "fraclap/oracle.hpp"
#include "support.hpp"

using namespace fraclap;

namespace {

using Big = boost::multiprecision::cpp_bin_float_100;

// Straight Kummer series at the given (possibly negative) z in 100 digits,
// so the alternating cancellation of the double route does not matter.
double hyp1f1_series_big(double a, double b, double z) {
  Big term = 1, sum = 1;
  const Big ba = a, bb = b, bz = z;
  for (int k = 0; k < 20000; ++k) {
    term *= (ba + k) / (bb + k) * bz / (k + 1);
    sum += term;
    if (k > 2 * std::abs(z) && abs(term) < Big(1e-40) * abs(sum)) break;
  }
  return static_cast<double>(sum);
}

double gaussian(std::span<const double> x) {
  double r2 = 0.0;
  for (double t : x) r2 += t * t;
  return std::exp(-r2);
}

}  // namespace

TEST(Hyp1f1, AtZeroIsOne) {
  for (double a : {-2.5, 0.3, 1.0, 4.0})
    for (double b : {0.5, 1.0, 3.7}) EXPECT_EQ(hyp1f1(a, b, 0.0), 1.0);
}

TEST(Hyp1f1, ExponentialIdentity) {
  for (double z : {-5.0, 1.0, 10.0}) EXPECT_NEAR(hyp1f1(1.0, 1.0, z), std::exp(z), 1e-12 * std::exp(z));
}

TEST(Hyp1f1, ExtendedPrecisionSeries) {
  const double v = hyp1f1(1.75, 1.0, -4.0);
  EXPECT_NEAR(v, hyp1f1_series_big(1.75, 1.0, -4.0), 1e-11 * std::abs(v));
  // frozen 30-digit reference
  EXPECT_NEAR(v, -0.06629966000450919026, 1e-11 * 0.0663);
  EXPECT_NEAR(hyp1f1(1.3, 0.5, -20.0), -0.007175269855007973723, 1e-11 * 0.00718);
}

TEST(Hyp1f1, KummerRouteMatchesDirectSeries) {
  // parameter pairs used by the Gaussian formula in one, two and three dimensions
  const std::pair<double, double> ab[] = {{0.55, 0.5}, {1.0, 0.5}, {1.45, 0.5}, {1.05, 1.0},
                                          {1.5, 1.0},  {1.95, 1.0}, {1.6, 1.5}, {2.4, 1.5}};
  for (auto [a, b] : ab) {
    for (int i = 1; i <= 100; ++i) {
      const double z = -50.0 * i / 100.0;
      const double fast = hyp1f1(a, b, z);
      const double ref = hyp1f1_series_big(a, b, z);
      EXPECT_NEAR(fast, ref, 1e-10 * std::abs(ref)) << "a=" << a << " b=" << b << " z=" << z;
    }
  }
}

TEST(Hyp1f1, Errors) {
  EXPECT_ERRC(hyp1f1(1.0, 0.0, 1.0), Errc::pole_in_b);
  EXPECT_ERRC(hyp1f1(1.0, -3.0, 1.0), Errc::pole_in_b);
  EXPECT_NO_THROW(hyp1f1(1.0, -2.5, 1.0));
  EXPECT_ERRC(hyp1f1(1.0, 1.0, -200.5), Errc::range_exceeded);
  EXPECT_ERRC(hyp1f1(1.0, 1.0, NAN), Errc::range_exceeded);
}

TEST(GaussianOracle, ValueAtOrigin) {
  const double zero[3] = {0.0, 0.0, 0.0};
  EXPECT_NEAR(gaussian_frac_lap(std::span<const double>(zero, 1), 2.0, 1), 2.0, 1e-14);
  for (int d : {1, 2, 3})
    for (double alpha : {0.3, 1.0, 1.7}) {
      const double expect = std::pow(2.0, alpha) * std::tgamma(0.5 * (d + alpha)) / std::tgamma(0.5 * d);
      EXPECT_NEAR(gaussian_frac_lap(zero, alpha, d), expect, 1e-13 * expect);
    }
}

TEST(GaussianOracle, ClassicalLaplacian) {
  const double one[1] = {1.0};
  EXPECT_NEAR(gaussian_frac_lap(one, 2.0, 1), -2.0 / std::numbers::e, 1e-13);
  // -Delta e^{-|x|^2} = (2d - 4|x|^2) e^{-|x|^2}
  const double x[3] = {0.3, -1.1, 0.7};
  for (int d : {1, 2, 3}) {
    double r2 = 0.0;
    for (int p = 0; p < d; ++p) r2 += x[p] * x[p];
    EXPECT_NEAR(gaussian_frac_lap(x, 2.0, d), (2.0 * d - 4.0 * r2) * std::exp(-r2), 1e-12);
  }
}

TEST(GaussianOracle, FrozenTwoDimensionalValue) {
  const double x[2] = {0.5, -0.25};
  EXPECT_NEAR(gaussian_frac_lap(x, 1.3, 2), 1.282695788854448293, 1e-12);
}

TEST(GaussianOracle, ContinuityAtTwo) {
  const double x[2] = {0.4, 0.9};
  for (int d : {1, 2}) {
    const double classical = gaussian_frac_lap(x, 2.0, d);
    double prev = INFINITY;
    for (int k = 2; k <= 6; ++k) {
      const double diff = std::abs(gaussian_frac_lap(x, 2.0 - std::pow(10.0, -k), d) - classical);
      EXPECT_LT(diff, prev) << "k = " << k;
      prev = diff;
    }
    EXPECT_LT(prev, 1e-5);
  }
}

TEST(GaussianOracle, Errors) {
  const double x[1] = {0.0};
  EXPECT_ERRC(gaussian_frac_lap(x, 0.0, 1), Errc::order_out_of_range);
  EXPECT_ERRC(gaussian_frac_lap(x, 2.01, 1), Errc::order_out_of_range);
}

TEST(NormalizationConstant, KnownValues) {
  // c_{1,1} = 1/pi, c_{3,1} = 1/pi^2
  EXPECT_NEAR(normalization_constant(1, 1.0), 1.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(normalization_constant(3, 1.0), 1.0 / (std::numbers::pi * std::numbers::pi), 1e-15);
  EXPECT_GT(normalization_constant(2, 0.01), 0.0);
  EXPECT_ERRC(normalization_constant(1, 2.0), Errc::order_out_of_range);
  EXPECT_ERRC(normalization_constant(1, 0.0), Errc::order_out_of_range);
}

TEST(IntegralOracle, ConstantGivesZero) {
  IntegralOptions o;
  o.limit = 3.0;
  o.envelope = [](double) { return 0.0; };
  const PointRule three = [](std::span<const double>) { return 3.0; };
  const double x[2] = {0.2, -0.7};
  for (double alpha : {0.3, 1.0, 1.8}) {
    EXPECT_EQ(integral_frac_lap(three, x, alpha, 1, o), 0.0);
    EXPECT_EQ(integral_frac_lap(three, x, alpha, 2, o), 0.0);
  }
}

TEST(IntegralOracle, AgreesWithClosedFormExamples) {
  const double zero[1] = {0.0};
  EXPECT_NEAR(integral_frac_lap(gaussian, zero, 1.0, 1), 2.0 / std::sqrt(std::numbers::pi), 1e-6);
  const double x1[1] = {1.5};
  EXPECT_NEAR(integral_frac_lap(gaussian, x1, 0.5, 1), gaussian_frac_lap(x1, 0.5, 1), 1e-6);
  const double x2[2] = {0.5, -0.25};
  EXPECT_NEAR(integral_frac_lap(gaussian, x2, 1.3, 2), gaussian_frac_lap(x2, 1.3, 2), 1e-6);
}

TEST(IntegralOracle, RandomSamples) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ua(0.2, 1.8), ux(-2.0, 2.0);
  for (int d : {1, 2}) {
    for (int i = 0; i < 5; ++i) {
      const double alpha = ua(rng);
      const double x[2] = {ux(rng), ux(rng)};
      EXPECT_NEAR(integral_frac_lap(gaussian, x, alpha, d), gaussian_frac_lap(x, alpha, d), 1e-5)
          << "d=" << d << " alpha=" << alpha;
    }
  }
}

TEST(IntegralOracle, ThreeDimensions) {
  const double x[3] = {0.3, 0.1, -0.4};
  EXPECT_NEAR(integral_frac_lap(gaussian, x, 1.1, 3), gaussian_frac_lap(x, 1.1, 3), 1e-5);
}

TEST(IntegralOracle, Errors) {
  const double x[1] = {0.0};
  IntegralOptions o;
  o.cutoff = 1.0;
  EXPECT_ERRC(integral_frac_lap(gaussian, x, 1.0, 1, o), Errc::tail_too_large);
  EXPECT_ERRC(integral_frac_lap(gaussian, x, 2.0, 1), Errc::order_out_of_range);
  EXPECT_ERRC(integral_frac_lap(gaussian, x, 1.0, 4), Errc::invalid_dim);
}

namespace {

OrderField linear_quarter() {
  return order_field([](std::span<const double> x) { return 1.0 + std::hypot(x[0], x[1]) / 4.0; }, 0.0, 2.0);
}

}  // namespace

TEST(Manufactured, AlphaTwoMatchesClassicalOperator) {
  const UniformGrid coarse = build_grid_with_step(2, -1.0, 1.0, 0.25);
  const GridFunction f = manufactured_rhs_case1(coarse, constant_order(2.0), 4.0, 1.0 / 64);
  const std::size_t centre = coarse.ravel({3, 3, 0});
  ASSERT_EQ(coarse.point(centre)[0], 0.0);
  // -Delta u + u at the origin for u = (1-x^2)^4 (1-y^2)^4 is 8 + 8 + 1; the
  // second difference adds h^2/12 u'''' = 12 h^2 per direction
  const double h2 = 1.0 / (64.0 * 64.0);
  EXPECT_NEAR(f[centre], 17.0 - 2.0 * 12.0 * h2, 1e-4);
  // and at another node the analytic value is within O(h_ref^2)
  const std::size_t j = coarse.ravel({1, 4, 0});
  const Point x = coarse.point(j);
  auto p = [](double t) { return std::pow(1.0 - t * t, 4); };
  auto p2 = [](double t) { return -8.0 * std::pow(1.0 - t * t, 3) + 48.0 * t * t * std::pow(1.0 - t * t, 2); };
  const double exact = -(p2(x[0]) * p(x[1]) + p(x[0]) * p2(x[1])) + p(x[0]) * p(x[1]);
  EXPECT_NEAR(f[j], exact, 50.0 * h2);
}

TEST(Manufactured, BoundaryRowsStayBounded) {
  const UniformGrid coarse = build_grid_with_step(2, -1.0, 1.0, 1.0 / 8);
  OperatorOptions o;
  o.quadrature = 512;
  const GridFunction f = manufactured_rhs_case1(coarse, linear_quarter(), 4.0, 1.0 / 64, 1.0, o);
  double interior = 0.0, edge = 0.0;
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    const auto idx = coarse.unravel(j);
    const bool at_edge = idx[0] == 0 || idx[1] == 0 || idx[0] + 1 == coarse.n[0] || idx[1] + 1 == coarse.n[1];
    ASSERT_TRUE(std::isfinite(f[j]));
    (at_edge ? edge : interior) = std::max(at_edge ? edge : interior, std::abs(f[j]));
  }
  EXPECT_LE(edge, 10.0 * interior);
}

TEST(Manufactured, Errors) {
  const UniformGrid coarse = build_grid_with_step(1, -1.0, 1.0, 0.25);
  EXPECT_ERRC(manufactured_rhs_case1(coarse, constant_order(1.5), 4.0, 0.1), Errc::not_nested);
  EXPECT_ERRC(manufactured_rhs_case1(coarse, constant_order(1.5), 4.0, 0.3 / 4), Errc::invalid_box);
  EXPECT_ERRC(manufactured_rhs_case1(coarse, constant_order(1.5), 1.0, 1.0 / 64), Errc::invalid_range);
  const UniformGrid fine = build_grid_with_step(1, -1.0, 1.0, 1.0 / 8);
  EXPECT_ERRC(nested_ratio(build_grid_with_step(1, -1.0, 1.0, 2.0 / 6), fine), Errc::not_nested);
  EXPECT_ERRC(nested_ratio(build_grid_with_step(1, -1.0, 2.0, 0.25), fine), Errc::not_nested);
}

TEST(Manufactured, RestrictionSamplesExactly) {
  const UniformGrid fine = build_grid_with_step(2, -1.0, 1.0, 1.0 / 16);
  const UniformGrid coarse = build_grid_with_step(2, -1.0, 1.0, 1.0 / 4);
  const auto rule = [](std::span<const double> x) { return 3.0 * x[0] - x[1] * x[1]; };
  const GridFunction r = restrict_to(coarse, sample(fine, rule));
  const GridFunction direct = sample(coarse, rule);
  EXPECT_LE(max_abs_diff(r.values, direct.values), 1e-15);
}
