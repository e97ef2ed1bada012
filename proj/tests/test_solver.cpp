#include <cmath>
#include <random>

#include "fraclap/expression.hpp"
#include "fraclap/solver.hpp"
#include "support.hpp"

using namespace fraclap;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Gaussian elimination with partial pivoting, used as the dense oracle.
std::vector<double> dense_solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

LinearMap matrix_map(const Matrix& a) {
  return [&a](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) s += a[i][k] * x[k];
      y[i] = s;
    }
  };
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

OperatorOptions direct() {
  OperatorOptions o;
  o.mode = ApplyMode::direct;
  return o;
}

OperatorOptions fast(std::size_t m) {
  OperatorOptions o;
  o.quadrature = m;
  return o;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Bicgstab, Identity) {
  const std::vector<double> b{1.0, -2.0, 3.5, 0.25};
  const auto r = bicgstab([](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); }, b);
  EXPECT_EQ(r.status, KrylovStatus::converged);
  EXPECT_LE(r.iterations, 1);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_DOUBLE_EQ(r.x[i], b[i]);
}

TEST(Bicgstab, DenseSpdMatchesElimination) {
  const std::size_t n = 8;
  Matrix m(n, std::vector<double>(n));
  const auto g = random_vector(n * n, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += g[i * n + k] * g[j * n + k];
      m[i][j] = s + (i == j ? 1.0 : 0.0);
    }
  const auto b = random_vector(n, 4);
  const auto r = bicgstab(matrix_map(m), b);
  ASSERT_TRUE(r.usable(1e-8)) << to_string(r.status);
  const auto x = dense_solve(m, b);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(r.x[i], x[i], 1e-10);
  // two applies per iteration, one fewer when the half step converges
  EXPECT_TRUE(r.applies == 2 * r.iterations || r.applies == 2 * r.iterations - 1) << r.applies;
}

TEST(Bicgstab, OneDimensionalFractionalSystem) {
  const UniformGrid g = build_grid(1, -1.0, 1.0, 255);
  const VariableOrderOperator op(g, constant_order(1.6));
  const std::vector<double> f(g.size(), 1.0);
  const auto r = bicgstab(shifted_operator(op, 0.0, 1.0), f);
  EXPECT_TRUE(r.usable(1e-8)) << to_string(r.status) << " " << r.residual;
  ASSERT_FALSE(r.history.empty());
  double best = INFINITY;
  for (double h : r.history) best = std::min(best, h);
  EXPECT_EQ(best, r.residual);
  std::vector<double> ax(g.size());
  op.apply(r.x, ax);
  double res = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) res += (ax[j] - f[j]) * (ax[j] - f[j]);
  EXPECT_NEAR(std::sqrt(res) / l2(f), r.residual, 1e-10);
}

TEST(Bicgstab, BreakdownNanAndMaxIter) {
  // skew map: rhat . A r = 0 on the first step
  const Matrix skew{{0.0, 1.0}, {-1.0, 0.0}};
  const std::vector<double> b{1.0, 0.5};
  const auto r = bicgstab(matrix_map(skew), b);
  EXPECT_EQ(r.status, KrylovStatus::breakdown);
  EXPECT_ERRC(require_solved(r, {}), Errc::breakdown);

  const auto n = bicgstab([](std::span<const double>, std::span<double> y) { std::fill(y.begin(), y.end(), NAN); }, b);
  EXPECT_EQ(n.status, KrylovStatus::nan);
  EXPECT_ERRC(require_solved(n, {}), Errc::nan_detected);

  const UniformGrid g = build_grid(1, -1.0, 1.0, 127);
  const VariableOrderOperator op(g, constant_order(1.9));
  KrylovConfig one;
  one.max_iter = 1;
  const auto m = bicgstab(shifted_operator(op, 0.0, 1.0), std::vector<double>(g.size(), 1.0), one);
  EXPECT_EQ(m.status, KrylovStatus::max_iter);
  EXPECT_ERRC(require_solved(m, one), Errc::max_iter_exceeded);

  EXPECT_ERRC(bicgstab(matrix_map(skew), b, KrylovConfig{0.0, 10, 10, 1e-8}), Errc::config);
  const std::vector<double> bad{NAN, 1.0};
  EXPECT_EQ(bicgstab(matrix_map(skew), bad).status, KrylovStatus::nan);
}

TEST(SolveElliptic, ZeroRightHandSide) {
  const UniformGrid g = build_grid(2, -1.0, 1.0, 31);
  const VariableOrderOperator op(g, order_from_spec("linear_quarter", 2), fast(256));
  const std::vector<double> b(g.size(), 1.0), f(g.size(), 0.0);
  const auto s = solve_elliptic(op, b, f);
  EXPECT_EQ(max_norm(s.u.values), 0.0);
}

TEST(SolveElliptic, Errors) {
  const UniformGrid g = build_grid(1, -1.0, 1.0, 15);
  const VariableOrderOperator op(g, constant_order(1.0), direct());
  std::vector<double> f(g.size(), 1.0), b(g.size(), 1.0);
  EXPECT_ERRC(solve_elliptic(op, b, std::vector<double>(3, 1.0)), Errc::grid_mismatch);
  b[4] = -0.1;
  EXPECT_ERRC(solve_elliptic(op, b, f), Errc::invalid_range);
}

TEST(SolveElliptic, DenseCrossCheckIn1D) {
  for (std::size_t n : {16u, 63u}) {
    const UniformGrid g = build_grid(1, -1.0, 1.0, n);
    const VariableOrderOperator op(g, order_from_spec("tanh_half", 1), direct());
    const auto b = random_vector(n, 8, 0.0, 2.0);
    const auto f = random_vector(n, 9, -1.0, 1.0);
    Matrix a(n, std::vector<double>(n));
    std::vector<double> e(n, 0.0), col(n);
    for (std::size_t k = 0; k < n; ++k) {
      e[k] = 1.0;
      op.apply_direct(e, col);
      e[k] = 0.0;
      for (std::size_t j = 0; j < n; ++j) a[j][k] = col[j] + (j == k ? b[j] : 0.0);
    }
    const auto x = dense_solve(a, f);
    const auto s = solve_elliptic(op, b, f);
    EXPECT_LE(max_abs_diff(s.u.values, x), 1e-8 * std::max(1.0, max_norm(x)));
  }
}

TEST(SolveElliptic, NonNegativeDataGivesNonNegativeSolution) {
  for (int dim : {1, 2}) {
    const UniformGrid g = build_grid(dim, -1.0, 1.0, dim == 1 ? 127 : 63);
    for (const char* field : {"linear_half", "tanh_half", "piecewise_x1"}) {
      const VariableOrderOperator op(g, order_from_spec(field, dim), fast(dim == 1 ? 0 : 256));
      auto f = random_vector(g.size(), 21, 0.0, 1.0);
      for (std::size_t j = 0; j < f.size(); j += 3) f[j] = 0.0;
      const auto b = random_vector(g.size(), 22, 0.0, 1.0);
      const auto s = solve_elliptic(op, b, f);
      const double floor = -KrylovConfig{}.tol * max_norm(f);
      for (double u : s.u.values) EXPECT_GE(u, floor) << field << " d=" << dim;
    }
  }
}

TEST(SolveElliptic, StabilityConstantSettles) {
  std::vector<double> c;
  for (std::size_t n : {15u, 31u, 63u}) {
    const UniformGrid g = build_grid(2, -1.0, 1.0, n);
    const VariableOrderOperator op(g, order_from_spec("linear_quarter", 2), fast(512));
    const std::vector<double> b(g.size(), 1.0), f(g.size(), 1.0);
    c.push_back(max_norm(solve_elliptic(op, b, f).u.values) / max_norm(f));
  }
  for (double v : c) EXPECT_NEAR(v, c.back(), 0.2 * c.back());
}

TEST(CrankNicolson, NoOperatorNoSourceIsIdentity) {
  const UniformGrid g = build_grid(2, -1.0, 1.0, 15);
  const VariableOrderOperator op(g, constant_order(1.2), fast(64));
  TimeStepper st;
  st.dt = 0.1;
  st.T = 0.1;
  st.diffusivity = 0.0;
  const auto u = random_vector(g.size(), 30);
  const auto next = step_crank_nicolson(u, 0.0, st, op);
  EXPECT_LE(max_abs_diff(next, u), 1e-15);
}

TEST(CrankNicolson, EllipticSolutionIsAFixedPoint) {
  const UniformGrid g = build_grid(1, -1.0, 1.0, 63);
  const VariableOrderOperator op(g, order_from_spec("linear_half", 1));
  const std::vector<double> b(g.size(), 0.5);
  const auto f = random_vector(g.size(), 31, 0.0, 1.0);
  const auto steady = solve_elliptic(op, b, f);
  TimeStepper st;
  st.dt = 0.05;
  st.T = 0.05;
  st.reaction = b;
  st.source = [&](std::span<const double> x, double) {
    // piecewise lookup of the grid samples
    const std::size_t j = static_cast<std::size_t>(std::llround((x[0] - g.lower[0]) / g.h[0])) - 1;
    return f[j];
  };
  const auto next = step_crank_nicolson(steady.u.values, 0.0, st, op);
  EXPECT_LE(max_abs_diff(next, steady.u.values), 1e-10 * max_norm(steady.u.values));
}

TEST(CrankNicolson, EnergyDecaysWithoutSource) {
  const UniformGrid g = build_grid(2, -1.0, 1.0, 31);
  const VariableOrderOperator op(g, order_from_spec("tanh_half", 2), fast(256));
  TimeStepper st;
  st.dt = 1.0 / 32;
  st.T = 0.25;
  const auto u0 = random_vector(g.size(), 40);
  const Trajectory tr = evolve(st, op, u0);
  ASSERT_EQ(tr.rows.size(), 9u);
  for (std::size_t k = 1; k < tr.rows.size(); ++k) {
    EXPECT_LE(tr.rows[k].l2, tr.rows[k - 1].l2 + st.krylov.tol * tr.rows[k - 1].l2);
  }
}

TEST(AllenCahn, UnitStateIsStationaryWithoutOperator) {
  const UniformGrid g = build_grid(2, 0.0, 1.0, 15);
  const VariableOrderOperator op(g, constant_order(1.8), fast(64));
  TimeStepper st;
  st.scheme = Scheme::three_level;
  st.dt = 1e-3;
  st.T = 1e-3;
  st.kappa = 0.05;
  st.diffusivity = 0.0;
  const std::vector<double> one(g.size(), 1.0), zero(g.size(), 0.0);
  EXPECT_LE(max_abs_diff(step_allen_cahn_three_level(one, one, st, op), one), 1e-13);
  EXPECT_LE(max_abs_diff(step_allen_cahn_start(one, st, op), one), 1e-13);
  EXPECT_LE(max_norm(step_allen_cahn_three_level(zero, zero, st, op)), 1e-14);
  EXPECT_LE(max_norm(step_allen_cahn_start(zero, st, op)), 1e-14);
}

TEST(AllenCahn, TwoBubblesMergeThenVanish) {
  const UniformGrid g = build_grid_with_step(2, 0.0, 1.0, 1.0 / 128);
  const VariableOrderOperator op(g, order_from_spec("bubbles_fast", 2));
  TimeStepper st;
  st.scheme = Scheme::three_level;
  st.dt = 1e-4;
  st.T = 0.01;
  st.kappa = 0.01;
  st.krylov.tol = 1e-12;
  const GridFunction u0 = sample(g, initial_rule("two_bubbles", {0.01, 0.07}));
  const Trajectory tr = evolve(st, op, u0.values);
  ASSERT_EQ(tr.rows.size(), 101u);
  EXPECT_EQ(tr.rows[0].components, 2);
  // component count never increases, and follows 2 -> 1 -> 0
  int seen_one = -1, seen_zero = -1;
  for (std::size_t k = 1; k < tr.rows.size(); ++k) {
    EXPECT_LE(tr.rows[k].components, tr.rows[k - 1].components);
    if (tr.rows[k].components == 1 && seen_one < 0) seen_one = static_cast<int>(k);
    if (tr.rows[k].components == 0 && seen_zero < 0) seen_zero = static_cast<int>(k);
  }
  ASSERT_GT(seen_one, 0);
  ASSERT_GT(seen_zero, seen_one);
  EXPECT_EQ(tr.rows[40].components, 1);  // t = 0.004
  EXPECT_EQ(tr.rows[100].components, 0);  // t = 0.01
}

TEST(Evolve, ZeroDataStaysZero) {
  const UniformGrid g = build_grid(2, -1.0, 1.0, 15);
  const VariableOrderOperator op(g, order_from_spec("linear_tenth", 2), fast(64));
  TimeStepper st;
  st.dt = 0.1;
  st.T = 0.5;
  int frames = 0;
  const Trajectory tr = evolve(st, op, std::vector<double>(g.size(), 0.0),
                               [&](std::size_t, double, std::span<const double>) { ++frames; }, 2);
  ASSERT_EQ(tr.rows.size(), 6u);
  for (const auto& r : tr.rows) {
    EXPECT_EQ(r.max_norm, 0.0);
    EXPECT_EQ(r.mass, 0.0);
    EXPECT_EQ(r.components, 0);
  }
  EXPECT_EQ(frames, 4);  // steps 0, 2, 4 and the last
}

TEST(Evolve, MaskedDiffusionMaxNormNonIncreasing) {
  const UniformGrid g = build_grid(2, -1.0, 1.0, 63);
  const DomainMask m = make_mask(g, mask_predicate("flower"));
  const VariableOrderOperator op(g, order_from_spec("coexist_a", 2), fast(256), m);
  TimeStepper st;
  st.dt = 2e-4;
  st.T = 4e-3;
  st.diffusivity = 0.2;
  std::vector<double> u0(g.size(), 1.0);
  m.apply(u0);
  const Trajectory tr = evolve(st, op, u0);
  for (std::size_t k = 1; k < tr.rows.size(); ++k) {
    EXPECT_LE(tr.rows[k].max_norm, tr.rows[k - 1].max_norm + 1e-12);
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!m[j]) EXPECT_EQ(tr.final_state[j], 0.0);
  }
  EXPECT_LT(tr.rows.back().max_norm, 1.0);
}

TEST(Evolve, ValidatesStepper) {
  const UniformGrid g = build_grid(1, -1.0, 1.0, 15);
  const VariableOrderOperator op(g, constant_order(1.0));
  TimeStepper st;
  st.dt = 0.0;
  st.T = 1.0;
  EXPECT_ERRC(evolve(st, op, std::vector<double>(g.size())), Errc::config);
  st.dt = 0.1;
  st.scheme = Scheme::three_level;
  EXPECT_ERRC(evolve(st, op, std::vector<double>(g.size())), Errc::config);
  st.kappa = 0.1;
  EXPECT_ERRC(evolve(st, op, std::vector<double>(3)), Errc::grid_mismatch);
}

TEST(Components, FaceAdjacency) {
  const UniformGrid g = build_grid(2, 0.0, 1.0, 5);
  std::vector<double> v(g.size(), -1.0);
  auto set = [&](std::size_t a, std::size_t b) { v[g.ravel({a, b, 0})] = 1.0; };
  set(0, 0);
  set(0, 1);
  set(1, 2);  // diagonal to (0, 1), so separate
  set(4, 4);
  EXPECT_EQ(count_components(g, v), 3);
  set(1, 1);
  EXPECT_EQ(count_components(g, v), 2);
  EXPECT_EQ(count_components(g, std::vector<double>(g.size(), 0.0)), 0);
  EXPECT_EQ(count_components(g, std::vector<double>(g.size(), 0.5)), 1);
}
