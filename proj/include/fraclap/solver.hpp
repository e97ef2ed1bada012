#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/operator.hpp"

namespace fraclap {

using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

struct KrylovConfig {
  double tol = 1e-14;       // relative residual target
  int max_iter = 2000;
  int stagnation = 10;      // stop after this many iterations without a new best residual,
                            // once the best residual is below accept
  double accept = 1e-8;     // a stagnated run still counts as solved below this residual
};

enum class KrylovStatus { converged, stagnated, max_iter, breakdown, nan };

inline const char* to_string(KrylovStatus s) {
  switch (s) {
    case KrylovStatus::converged: return "converged";
    case KrylovStatus::stagnated: return "stagnated";
    case KrylovStatus::max_iter: return "max_iter";
    case KrylovStatus::breakdown: return "breakdown";
    case KrylovStatus::nan: return "nan";
  }
  return "unknown";
}

struct KrylovResult {
  std::vector<double> x;      // best iterate seen
  int iterations = 0;
  int applies = 0;            // operator applications, two per full iteration
  double residual = 0.0;      // relative residual of x
  KrylovStatus status = KrylovStatus::converged;
  std::vector<double> history;  // relative residual after each iteration

  /// Converged, or stagnated at an acceptable residual.
  bool usable(double accept) const {
    return status == KrylovStatus::converged || (status == KrylovStatus::stagnated && residual <= accept);
  }
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

/// BiCGSTAB (van der Vorst) from a zero initial guess, or from x0 when given.
/// One iteration applies the map twice.
inline KrylovResult bicgstab(const LinearMap& map, std::span<const double> rhs, const KrylovConfig& cfg = {},
                             std::span<const double> x0 = {}) {
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) fail(Errc::config, "need tol > 0 and max_iter >= 1");
  const std::size_t n = rhs.size();
  KrylovResult res;
  auto apply = [&](std::span<const double> x, std::span<double> y) {
    ++res.applies;
    map(x, y);
  };
  res.x.assign(n, 0.0);
  const double bnorm = detail::norm2(rhs);
  if (!std::isfinite(bnorm)) {
    res.status = KrylovStatus::nan;
    return res;
  }
  if (bnorm == 0.0) return res;

  std::vector<double> x(n, 0.0), r(rhs.begin(), rhs.end());
  if (!x0.empty()) {
    std::copy(x0.begin(), x0.end(), x.begin());
    std::vector<double> ax(n);
    apply(x, ax);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ax[i];
  }
  const std::vector<double> rhat = r;
  std::vector<double> p(n, 0.0), v(n, 0.0), s(n), t(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  double best = detail::norm2(r) / bnorm;
  res.x = x;
  res.residual = best;
  if (best <= cfg.tol) return res;
  int since_best = 0;
  const double tiny = std::numeric_limits<double>::min() * 1e10;

  auto record = [&](double rel, const std::vector<double>& xi) {
    res.history.push_back(rel);
    if (rel < best) {
      best = rel;
      res.x = xi;
      res.residual = rel;
      since_best = 0;
    } else {
      ++since_best;
    }
  };

  for (int it = 1; it <= cfg.max_iter; ++it) {
    res.iterations = it;
    const double rho_new = detail::dot(rhat, r);
    if (std::abs(rho_new) <= tiny) {
      res.status = KrylovStatus::breakdown;
      return res;
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    apply(p, v);
    const double rv = detail::dot(rhat, v);
    if (std::abs(rv) <= tiny) {
      res.status = KrylovStatus::breakdown;
      return res;
    }
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    const double snorm = detail::norm2(s) / bnorm;
    if (!std::isfinite(snorm)) {
      res.status = KrylovStatus::nan;
      return res;
    }
    if (snorm <= cfg.tol) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
      record(snorm, x);
      res.x = x;
      res.residual = snorm;
      res.status = KrylovStatus::converged;
      return res;
    }
    apply(s, t);
    const double tt = detail::dot(t, t);
    if (tt <= tiny) {
      res.status = KrylovStatus::breakdown;
      return res;
    }
    omega = detail::dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i] + omega * s[i];
      r[i] = s[i] - omega * t[i];
    }
    const double rel = detail::norm2(r) / bnorm;
    if (!std::isfinite(rel)) {
      res.status = KrylovStatus::nan;
      return res;
    }
    record(rel, x);
    if (rel <= cfg.tol) {
      res.status = KrylovStatus::converged;
      return res;
    }
    if (std::abs(omega) <= tiny) {
      res.status = KrylovStatus::breakdown;
      return res;
    }
    // early BiCGSTAB residuals often sit above the initial one for dozens of
    // iterations, so stagnation is only judged near the precision floor
    if (since_best >= cfg.stagnation && best <= cfg.accept) {
      res.status = KrylovStatus::stagnated;
      return res;
    }
  }
  res.status = KrylovStatus::max_iter;
  return res;
}

/// Throws the matching error unless the result is usable.
inline void require_solved(const KrylovResult& r, const KrylovConfig& cfg) {
  if (r.usable(cfg.accept)) return;
  const std::string detail = "after " + std::to_string(r.iterations) + " iterations, residual " +
                             std::to_string(r.residual);
  switch (r.status) {
    case KrylovStatus::breakdown: fail(Errc::breakdown, "BiCGSTAB breakdown " + detail);
    case KrylovStatus::nan: fail(Errc::nan_detected, "non-finite residual " + detail);
    default: fail(Errc::max_iter_exceeded, std::string(to_string(r.status)) + " " + detail);
  }
}

/// y = c_i x + c_a A x + diag(d) x on unmasked rows; masked rows are the
/// identity so exterior unknowns stay at their zero right-hand side.
inline LinearMap shifted_operator(const VariableOrderOperator& op, double c_i, double c_a,
                                  std::span<const double> d = {}) {
  return [&op, c_i, c_a, d](std::span<const double> x, std::span<double> y) {
    op.apply(x, y);
    const DomainMask* mask = op.mask();
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (mask && !(*mask)[j]) {
        y[j] = x[j];
        continue;
      }
      y[j] = c_i * x[j] + c_a * y[j] + (d.empty() ? 0.0 : d[j] * x[j]);
    }
  };
}

struct SolveResult {
  GridFunction u;
  KrylovResult krylov;
};

/// (-Delta_h)^{alpha/2} u + b u = f at unmasked nodes, u = 0 elsewhere.
inline SolveResult solve_elliptic(const VariableOrderOperator& op, std::span<const double> b,
                                  std::span<const double> f, const KrylovConfig& cfg = {}) {
  const std::size_t n = op.grid().size();
  if (f.size() != n || (!b.empty() && b.size() != n)) fail(Errc::grid_mismatch, "coefficient length mismatch");
  for (double bj : b) {
    if (!(bj >= 0.0)) fail(Errc::invalid_range, "reaction coefficient must be non-negative");
  }
  std::vector<double> rhs(f.begin(), f.end());
  if (op.mask()) op.mask()->apply(rhs);
  auto kr = bicgstab(shifted_operator(op, 0.0, 1.0, b), rhs, cfg);
  require_solved(kr, cfg);
  if (op.mask()) op.mask()->apply(kr.x);
  SolveResult out{GridFunction(op.grid(), kr.x), std::move(kr)};
  return out;
}

using SpaceTimeRule = std::function<double(std::span<const double>, double)>;

enum class Scheme { crank_nicolson, three_level };

struct TimeStepper {
  Scheme scheme = Scheme::crank_nicolson;
  double dt = 0.0;
  double T = 0.0;
  double kappa = 0.0;        // Allen-Cahn interface width
  double diffusivity = 1.0;  // coefficient in front of the fractional operator
  SpaceTimeRule source;      // f(x, t); empty means zero
  std::vector<double> reaction;  // b(x) >= 0, empty means zero
  KrylovConfig krylov;

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

  void validate() const {
    if (!(dt > 0.0) || !(T >= dt * (1.0 - 1e-12))) fail(Errc::config, "need dt > 0 and T >= dt");
    if (scheme == Scheme::three_level && !(kappa > 0.0)) fail(Errc::config, "Allen-Cahn needs kappa > 0");
  }
};

struct StepInfo {
  int iterations = 0;
  int applies = 0;
  double residual = 0.0;
};

/// One Crank-Nicolson step of u_t + k A u + b u = f:
/// (I + dt/2 (kA + B)) u^{n+1} = (I - dt/2 (kA + B)) u^n + dt f(t_n + dt/2).
inline std::vector<double> step_crank_nicolson(std::span<const double> u_prev, double t_prev, const TimeStepper& st,
                                               const VariableOrderOperator& op, StepInfo* info = nullptr) {
  const std::size_t n = op.grid().size();
  if (u_prev.size() != n) fail(Errc::grid_mismatch, "state length mismatch");
  const double half = 0.5 * st.dt;
  std::vector<double> diag;
  if (!st.reaction.empty()) {
    diag.resize(n);
    for (std::size_t j = 0; j < n; ++j) diag[j] = half * st.reaction[j];
  }
  std::vector<double> rhs(n);
  shifted_operator(op, 1.0, -half * st.diffusivity)(u_prev, rhs);
  for (std::size_t j = 0; j < n; ++j) {
    if (!diag.empty()) rhs[j] -= diag[j] * u_prev[j];
  }
  if (st.source) {
    const double tm = t_prev + half;
    for (std::size_t j = 0; j < n; ++j) {
      const Point x = op.grid().point(j);
      rhs[j] += st.dt * st.source(std::span<const double>(x.data(), op.grid().dim), tm);
    }
  }
  if (op.mask()) op.mask()->apply(rhs);
  auto kr = bicgstab(shifted_operator(op, 1.0, half * st.diffusivity, diag), rhs, st.krylov);
  require_solved(kr, st.krylov);
  if (info) *info = {kr.iterations, kr.applies, kr.residual};
  if (op.mask()) op.mask()->apply(kr.x);
  return std::move(kr.x);
}

namespace detail {

// Linearized Allen-Cahn step in the shifted variable w = u + 1 (zero outside).
// The nonlinearity u^3 - u is frozen as (u^mid)^2 avg(u) - u^mid, where avg
// is the mean of the old and new levels, giving
//   (I + c dt (A + E)) w^{new} = (I - c dt (A + E)) w^{old} + 2 c dt (E 1 + u^mid / kappa^2),
// E = diag((u^mid)^2)/kappa^2; c = 1 for the three-level step from
// (old, mid) = (n-1, n), c = 1/2 for the two-level start with old = mid = 0.
inline std::vector<double> allen_cahn_solve(std::span<const double> u_old, std::span<const double> u_mid,
                                            double c, const TimeStepper& st, const VariableOrderOperator& op,
                                            StepInfo* info) {
  const std::size_t n = op.grid().size();
  if (u_old.size() != n || u_mid.size() != n) fail(Errc::grid_mismatch, "state length mismatch");
  const double k2 = st.kappa * st.kappa;
  const double cdt = c * st.dt;
  std::vector<double> e(n), w_old(n), rhs(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = cdt * u_mid[j] * u_mid[j] / k2;
    w_old[j] = u_old[j] + 1.0;
  }
  if (op.mask()) op.mask()->apply(w_old);
  shifted_operator(op, 1.0, -cdt * st.diffusivity)(w_old, rhs);
  for (std::size_t j = 0; j < n; ++j) rhs[j] += -e[j] * w_old[j] + 2.0 * e[j] + 2.0 * cdt * u_mid[j] / k2;
  if (op.mask()) op.mask()->apply(rhs);
  auto kr = bicgstab(shifted_operator(op, 1.0, cdt * st.diffusivity, e), rhs, st.krylov);
  require_solved(kr, st.krylov);
  if (info) *info = {kr.iterations, kr.applies, kr.residual};
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = kr.x[j] - 1.0;
  if (op.mask()) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(*op.mask())[j]) u[j] = -1.0;
    }
  }
  return u;
}

}  // namespace detail

/// Two-level linearized Crank-Nicolson start for the Allen-Cahn equation.
inline std::vector<double> step_allen_cahn_start(std::span<const double> u0, const TimeStepper& st,
                                                 const VariableOrderOperator& op, StepInfo* info = nullptr) {
  return detail::allen_cahn_solve(u0, u0, 0.5, st, op, info);
}

/// Three-level linearized step for u_t + A u = -(u^3 - u)/kappa^2 with u = -1
/// outside the box. The operator and the frozen cubic term act on the
/// average of levels n-1 and n+1.
inline std::vector<double> step_allen_cahn_three_level(std::span<const double> u_nm1, std::span<const double> u_n,
                                                       const TimeStepper& st, const VariableOrderOperator& op,
                                                       StepInfo* info = nullptr) {
  return detail::allen_cahn_solve(u_nm1, u_n, 1.0, st, op, info);
}

/// Connected components of {v > level} under face adjacency.
inline int count_components(const UniformGrid& g, std::span<const double> v, double level = 0.0) {
  std::vector<char> seen(g.size(), 0);
  std::vector<std::size_t> stack;
  int count = 0;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (seen[start] || !(v[start] > level)) continue;
    ++count;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      const auto idx = g.unravel(j);
      for (int p = 0; p < g.dim; ++p) {
        for (int s : {-1, 1}) {
          auto nb = idx;
          if (s < 0 && nb[p] == 0) continue;
          if (s > 0 && nb[p] + 1 >= g.n[p]) continue;
          nb[p] = s < 0 ? nb[p] - 1 : nb[p] + 1;
          const std::size_t k = g.ravel(nb);
          if (!seen[k] && v[k] > level) {
            seen[k] = 1;
            stack.push_back(k);
          }
        }
      }
    }
  }
  return count;
}

struct ObserverRow {
  std::size_t step = 0;
  double time = 0.0;
  double max_norm = 0.0;
  double l2 = 0.0;     // sqrt(h^d sum u^2)
  double mass = 0.0;   // h^d sum u
  int components = 0;  // of {u > 0}
  int iterations = 0;  // Krylov iterations of the step that produced this row
};

inline ObserverRow observe(const UniformGrid& g, std::span<const double> u, std::size_t step, double t,
                           int iterations) {
  ObserverRow row{step, t, max_norm(u), 0.0, 0.0, count_components(g, u), iterations};
  const double vol = g.cell_volume();
  for (double x : u) {
    row.l2 += x * x;
    row.mass += x;
  }
  row.l2 = std::sqrt(vol * row.l2);
  row.mass *= vol;
  return row;
}

struct Trajectory {
  std::vector<ObserverRow> rows;
  std::vector<double> final_state;
};

using FrameSink = std::function<void(std::size_t step, double t, std::span<const double> u)>;

/// Steps from u0 to T, recording one observer row per step (row 0 is the
/// initial state). `every` thins frame output, not observer rows.
inline Trajectory evolve(const TimeStepper& st, const VariableOrderOperator& op, std::span<const double> u0,
                         const FrameSink& frames = {}, std::size_t every = 1) {
  st.validate();
  const UniformGrid& g = op.grid();
  if (u0.size() != g.size()) fail(Errc::grid_mismatch, "initial state length mismatch");
  Trajectory tr;
  std::vector<double> u(u0.begin(), u0.end()), u_prev;
  tr.rows.push_back(observe(g, u, 0, 0.0, 0));
  if (frames) frames(0, 0.0, u);
  const std::size_t n_steps = st.steps();
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const double t_prev = (k - 1) * st.dt;
    StepInfo info;
    std::vector<double> next;
    if (st.scheme == Scheme::crank_nicolson) {
      next = step_crank_nicolson(u, t_prev, st, op, &info);
    } else if (k == 1) {
      next = step_allen_cahn_start(u, st, op, &info);
    } else {
      next = step_allen_cahn_three_level(u_prev, u, st, op, &info);
    }
    u_prev = std::move(u);
    u = std::move(next);
    const double t = k * st.dt;
    tr.rows.push_back(observe(g, u, k, t, info.iterations));
    if (frames && (k % std::max<std::size_t>(1, every) == 0 || k == n_steps)) frames(k, t, u);
  }
  tr.final_state = std::move(u);
  return tr;
}

}  // namespace fraclap
