#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/grid.hpp"

namespace fraclap {

/// Rank-r Lagrange interpolation in the order variable on Chebyshev points
/// of the first kind, mapped to [alpha_min, alpha_max]. Nodes increase.
struct ChebyshevPlan {
  int rank = 1;
  double alpha_min = 1.0;
  double alpha_max = 1.0;
  std::vector<double> nodes;
  std::vector<double> weights;  // barycentric weights, same order as nodes
};

inline constexpr int default_rank = 7;

inline ChebyshevPlan build_plan(double alpha_min, double alpha_max, int r) {
  if (!(alpha_min > 0.0) || !(alpha_max <= 2.0) || !(alpha_min <= alpha_max) || r < 1) {
    fail(Errc::invalid_range, "need 0 < alpha_min <= alpha_max <= 2 and r >= 1, got [" + std::to_string(alpha_min) +
                                  ", " + std::to_string(alpha_max) + "], r = " + std::to_string(r));
  }
  ChebyshevPlan plan;
  plan.alpha_min = alpha_min;
  plan.alpha_max = alpha_max;
  if (alpha_max - alpha_min <= 1e-14 * alpha_max) r = 1;
  plan.rank = r;
  if (r == 1) {
    plan.nodes = {0.5 * (alpha_min + alpha_max)};
    plan.weights = {1.0};
    return plan;
  }
  const double mid = 0.5 * (alpha_min + alpha_max);
  const double half = 0.5 * (alpha_max - alpha_min);
  plan.nodes.resize(r);
  plan.weights.resize(r);
  for (int k = 0; k < r; ++k) {
    const double theta = (2.0 * k + 1.0) * std::numbers::pi / (2.0 * r);
    // k = 0 is the largest node; store in increasing order
    plan.nodes[r - 1 - k] = mid + half * std::cos(theta);
    plan.weights[r - 1 - k] = (k % 2 == 0 ? 1.0 : -1.0) * std::sin(theta);
  }
  return plan;
}

/// Values L_q(t) of all cardinal polynomials at t (second barycentric form).
inline void eval_lagrange(const ChebyshevPlan& plan, double t, std::span<double> out) {
  const double slack = 1e-12 * std::max(1.0, plan.alpha_max);
  if (!(t >= plan.alpha_min - slack && t <= plan.alpha_max + slack)) {
    fail(Errc::out_of_range, "order " + std::to_string(t) + " outside the plan interval");
  }
  const int r = plan.rank;
  if (r == 1) {
    out[0] = 1.0;
    return;
  }
  for (int q = 0; q < r; ++q) {
    if (t == plan.nodes[q]) {
      std::fill(out.begin(), out.begin() + r, 0.0);
      out[q] = 1.0;
      return;
    }
  }
  double denom = 0.0;
  for (int q = 0; q < r; ++q) {
    out[q] = plan.weights[q] / (t - plan.nodes[q]);
    denom += out[q];
  }
  for (int q = 0; q < r; ++q) out[q] /= denom;
}

inline std::vector<double> eval_lagrange(const ChebyshevPlan& plan, double t) {
  std::vector<double> out(plan.rank);
  eval_lagrange(plan, t, out);
  return out;
}

/// Per-node rank coefficients c_q(x_j) = L_q(alpha_j), stored node-major.
struct RankCoefficients {
  int rank = 1;
  std::vector<double> values;  // values[j * rank + q]

  double operator()(std::size_t j, int q) const { return values[j * rank + q]; }
  std::size_t nodes() const { return values.size() / static_cast<std::size_t>(rank); }
};

inline RankCoefficients rank_coefficients(const ChebyshevPlan& plan, std::span<const double> alpha) {
  RankCoefficients c{plan.rank, std::vector<double>(alpha.size() * plan.rank)};
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    eval_lagrange(plan, alpha[j], std::span<double>(c.values.data() + j * plan.rank, plan.rank));
  }
  return c;
}

struct RankEstimate {
  int rank = 1;
  double error = 0.0;  // sup interpolation error relative to (4d/h^2)^{alpha_max/2}
};

/// Sup-norm error of the rank-r interpolant of t -> a^{t/2} over a sample of
/// orders in [alpha_min, alpha_max] and symbol values a = M_h(xi) along the
/// diagonal of the frequency box, relative to the largest symbol power.
inline double interpolation_error(const ChebyshevPlan& plan, double h, int dim = 1) {
  const double amax_sym = 4.0 * dim / (h * h);
  std::vector<double> symbols{0.0};
  const int uniform = 400, logs = 120;
  for (int i = 1; i <= uniform; ++i) {
    const double s = std::sin(0.5 * std::numbers::pi * i / uniform);
    symbols.push_back(amax_sym * s * s);
  }
  // frequencies down to 1e-3 of the Nyquist frequency
  for (int i = 0; i < logs; ++i) {
    const double frac = std::pow(10.0, -3.0 + 3.0 * i / logs);
    const double s = std::sin(0.5 * std::numbers::pi * frac);
    symbols.push_back(amax_sym * s * s);
  }
  const double scale = std::pow(amax_sym, 0.5 * plan.alpha_max);
  std::vector<double> basis(plan.rank), lag(plan.rank);
  double err = 0.0;
  const int nt = 201;
  for (int i = 0; i < nt; ++i) {
    const double t = plan.alpha_min + (plan.alpha_max - plan.alpha_min) * i / (nt - 1);
    eval_lagrange(plan, t, lag);
    for (double a : symbols) {
      double approx = 0.0;
      for (int q = 0; q < plan.rank; ++q) approx += lag[q] * std::pow(a, 0.5 * plan.nodes[q]);
      err = std::max(err, std::abs(std::pow(a, 0.5 * t) - approx));
    }
  }
  return err / scale;
}

inline RankEstimate estimate_rank(double alpha_min, double alpha_max, double h, double epsilon, int dim = 1) {
  if (!(epsilon > 0.0)) fail(Errc::invalid_range, "epsilon must be positive");
  if (!(h > 0.0)) fail(Errc::invalid_range, "step must be positive");
  constexpr int cap = 32;
  double last = 0.0;
  for (int r = 1; r <= cap; ++r) {
    const ChebyshevPlan plan = build_plan(alpha_min, alpha_max, r);
    if (plan.rank == 1 && r == 1 && alpha_max - alpha_min <= 1e-14 * alpha_max) return {1, 0.0};
    last = interpolation_error(plan, h, dim);
    if (last <= epsilon) return {r, last};
  }
  fail(Errc::rank_cap_exceeded,
       "rank 32 reaches only " + std::to_string(last) + " against epsilon " + std::to_string(epsilon));
}

}  // namespace fraclap
