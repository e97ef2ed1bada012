#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/operator.hpp"

namespace fraclap {

namespace detail {

inline double kummer_series(double a, double b, double z) {
  double term = 1.0, sum = 1.0;
  for (int k = 0; k < 5000; ++k) {
    term *= (a + k) / (b + k) * z / (k + 1);
    sum += term;
    if (term == 0.0 || std::abs(term) <= 1e-17 * std::abs(sum)) return sum;
  }
  fail(Errc::range_exceeded, "Kummer series did not converge");
}

}  // namespace detail

/// Confluent hypergeometric 1F1(a; b; z) for real arguments, |z| <= 200.
/// Negative z goes through Kummer's transformation so the summed series has
/// non-negative argument.
inline double hyp1f1(double a, double b, double z) {
  if (b <= 0.0 && b == std::floor(b)) fail(Errc::pole_in_b, "b = " + std::to_string(b) + " is a pole");
  if (!std::isfinite(z) || std::abs(z) > 200.0) fail(Errc::range_exceeded, "|z| above 200");
  if (z >= 0.0) return detail::kummer_series(a, b, z);
  return std::exp(z) * detail::kummer_series(b - a, b, -z);
}

/// (-Delta)^{alpha/2} exp(-|x|^2) in closed form.
inline double gaussian_frac_lap(std::span<const double> x, double alpha, int d) {
  if (!(alpha > 0.0 && alpha <= 2.0)) fail(Errc::order_out_of_range, "order outside (0, 2]");
  double r2 = 0.0;
  for (int p = 0; p < d; ++p) r2 += x[p] * x[p];
  const double scale = std::exp(alpha * std::numbers::ln2 + std::lgamma(0.5 * (d + alpha)) - std::lgamma(0.5 * d));
  return scale * hyp1f1(0.5 * (d + alpha), 0.5 * d, -r2);
}

/// c_{d,alpha} = 2^{alpha-1} alpha Gamma((alpha+d)/2) / (pi^{d/2} Gamma(1-alpha/2)).
inline double normalization_constant(int d, double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) {
    fail(Errc::order_out_of_range, "normalization constant needs 0 < alpha < 2 (pole at alpha = 2)");
  }
  return std::exp((alpha - 1.0) * std::numbers::ln2 + std::log(alpha) + std::lgamma(0.5 * (alpha + d)) -
                  0.5 * d * std::log(std::numbers::pi) - std::lgamma(1.0 - 0.5 * alpha));
}

/// Surface area of the unit sphere in R^d.
inline double sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

struct IntegralOptions {
  double cutoff = 0.0;   // radius R of the quadrature ball; 0 picks |x| + 8
  double tol = 1e-9;     // absolute tolerance on the returned value
  double inner = 1e-3;   // radius below which the second-order Taylor model is used
  double limit = 0.0;    // value of u at infinity
  // sup |u(y) - limit| over |y| >= rho; the default matches exp(-|y|^2)
  std::function<double(double)> envelope = [](double rho) { return rho > 0.0 ? std::exp(-rho * rho) : 1.0; };
};

/// Brute-force (-Delta)^{alpha/2} u(x) from the hypersingular integral in
/// symmetrized form, c/2 * int (2u(x) - u(x+y) - u(x-y)) / |y|^{d+alpha} dy,
/// in polar coordinates. The far field |y| > R contributes
/// 2 (u(x) - limit) |S^{d-1}| R^{-alpha} / alpha plus a term bounded by the envelope.
inline double integral_frac_lap(const PointRule& u, std::span<const double> x, double alpha, int d,
                                IntegralOptions opts = {}) {
  if (d < 1 || d > 3) fail(Errc::invalid_dim, "dimension must be 1, 2 or 3");
  const double c = normalization_constant(d, alpha);
  double xnorm = 0.0;
  for (int p = 0; p < d; ++p) xnorm += x[p] * x[p];
  xnorm = std::sqrt(xnorm);
  const double big_r = opts.cutoff > 0.0 ? opts.cutoff : xnorm + 8.0;
  const double area = sphere_area(d);
  const double ux = u(x.subspan(0, d));

  const double tail_bound = 0.5 * c * 2.0 * opts.envelope(big_r - xnorm) * area * std::pow(big_r, -alpha) / alpha;
  if (tail_bound > opts.tol) fail(Errc::tail_too_large, "far-field bound " + std::to_string(tail_bound));

  // second difference 2u(x) - u(x + r w) - u(x - r w)
  auto diff = [&](double r, const double* w) {
    double p[3], m[3];
    for (int i = 0; i < d; ++i) {
      p[i] = x[i] + r * w[i];
      m[i] = x[i] - r * w[i];
    }
    return 2.0 * ux - u(std::span<const double>(p, d)) - u(std::span<const double>(m, d));
  };

  // spherical integral of the second difference at radius r
  auto sphere = [&](double r) -> double {
    if (d == 1) {
      const double w = 1.0;
      return 2.0 * diff(r, &w);
    }
    if (d == 2) {
      // pi-periodic in theta; trapezoid doubled until stable
      double prev = 0.0;
      for (int n = 64; n <= 8192; n *= 2) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
          const double t = std::numbers::pi * k / n;
          const double w[2] = {std::cos(t), std::sin(t)};
          s += diff(r, w);
        }
        s *= 2.0 * std::numbers::pi / n;
        if (n > 64 && std::abs(s - prev) <= 1e-13 * std::max(1.0, std::abs(s))) return s;
        prev = s;
      }
      fail(Errc::quadrature_nonconvergent, "angular quadrature did not settle");
    }
    // d == 3: upper hemisphere in mu = cos(theta), trapezoid in phi
    auto ring = [&](double mu) {
      const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
      double prev = 0.0;
      for (int n = 32; n <= 4096; n *= 2) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
          const double ph = 2.0 * std::numbers::pi * k / n;
          const double w[3] = {st * std::cos(ph), st * std::sin(ph), mu};
          s += diff(r, w);
        }
        s *= 2.0 * std::numbers::pi / n;
        if (n > 32 && std::abs(s - prev) <= 1e-13 * std::max(1.0, std::abs(s))) return s;
        prev = s;
      }
      fail(Errc::quadrature_nonconvergent, "azimuthal quadrature did not settle");
    };
    double err = 0.0;
    const double half = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(ring, 0.0, 1.0, 10, 1e-11, &err);
    return 2.0 * half;
  };

  // near field: G(r) ~ D2 r^2 integrated against r^{-1-alpha}
  const double rt = opts.inner;
  const double d2 = sphere(rt) / (rt * rt);
  double total = d2 * std::pow(rt, 2.0 - alpha) / (2.0 - alpha);

  // middle range on geometrically graded panels, 30-point Gauss checked
  // against 20-point Gauss on each
  auto radial = [&](double r) { return sphere(r) * std::pow(r, -1.0 - alpha); };
  double a = rt;
  while (a < big_r) {
    const double b = std::min({big_r, 2.0 * a, a + 0.25});
    const double fine = boost::math::quadrature::gauss<double, 30>::integrate(radial, a, b);
    const double coarse = boost::math::quadrature::gauss<double, 20>::integrate(radial, a, b);
    if (!(std::abs(fine - coarse) <= std::max(1e-3 * opts.tol / c, 1e-10 * std::abs(fine)))) {
      fail(Errc::quadrature_nonconvergent, "radial panel disagreement " + std::to_string(std::abs(fine - coarse)));
    }
    total += fine;
    a = b;
  }
  total += 2.0 * (ux - opts.limit) * area * std::pow(big_r, -alpha) / alpha;
  return 0.5 * c * total;
}

/// Fine-grid manufactured right-hand side of (-Delta_h)^{alpha/2} u + b u
/// for u = prod_p (1 - x_p^2)^beta on the fine grid with step h_ref over the
/// same box as `coarse`.
inline GridFunction manufactured_fine(const UniformGrid& coarse, const OrderField& field, double beta, double h_ref,
                                      double reaction = 1.0, OperatorOptions opts = {}) {
  if (beta < 2.0) fail(Errc::invalid_range, "beta must be at least 2");
  const UniformGrid fine = build_grid_with_step(coarse.dim, coarse.lower[0], coarse.upper[0], h_ref);
  for (int p = 1; p < coarse.dim; ++p) {
    if (coarse.lower[p] != coarse.lower[0] || coarse.upper[p] != coarse.upper[0]) {
      fail(Errc::not_nested, "manufactured solution expects a cube");
    }
  }
  const GridFunction u = sample(fine, [beta](std::span<const double> y) {
    double v = 1.0;
    for (double t : y) v *= std::pow(std::max(0.0, 1.0 - t * t), beta);
    return v;
  });
  const VariableOrderOperator op(fine, field, std::move(opts));
  GridFunction f = op.apply(u);
  for (std::size_t j = 0; j < f.size(); ++j) f[j] += reaction * u[j];
  return f;
}

/// Node ratio per dimension between a coarse grid and a fine grid whose
/// node set contains it.
inline std::array<std::size_t, 3> nested_ratio(const UniformGrid& coarse, const UniformGrid& fine) {
  if (fine.dim != coarse.dim) fail(Errc::not_nested, "dimensions differ");
  std::array<std::size_t, 3> ratio{1, 1, 1};
  for (int p = 0; p < fine.dim; ++p) {
    const double q = coarse.h[p] / fine.h[p];
    const double rq = std::round(q);
    if (std::abs(q - rq) > 1e-9 * q || rq < 1.0 || std::abs(coarse.lower[p] - fine.lower[p]) > 1e-12 ||
        std::abs(coarse.upper[p] - fine.upper[p]) > 1e-12) {
      fail(Errc::not_nested, "coarse grid nodes are not fine grid nodes");
    }
    ratio[p] = static_cast<std::size_t>(rq);
  }
  return ratio;
}

/// Exact sampling of a fine grid function at the nodes of a nested coarse grid.
inline GridFunction restrict_to(const UniformGrid& coarse, const GridFunction& fine) {
  const UniformGrid& g = fine.grid;
  const auto ratio = nested_ratio(coarse, g);
  GridFunction out(coarse);
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    const auto c = coarse.unravel(j);
    std::array<std::size_t, 3> f{0, 0, 0};
    for (int p = 0; p < g.dim; ++p) f[p] = (c[p] + 1) * ratio[p] - 1;
    out[j] = fine[g.ravel(f)];
  }
  return out;
}

inline GridFunction manufactured_rhs_case1(const UniformGrid& coarse, const OrderField& field, double beta,
                                           double h_ref, double reaction = 1.0, OperatorOptions opts = {}) {
  nested_ratio(coarse, build_grid_with_step(coarse.dim, coarse.lower[0], coarse.upper[0], h_ref));
  return restrict_to(coarse, manufactured_fine(coarse, field, beta, h_ref, reaction, std::move(opts)));
}

}  // namespace fraclap
