#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fraclap/error.hpp"
#include "fraclap/expression.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/operator.hpp"
#include "fraclap/oracle.hpp"
#include "fraclap/solver.hpp"
#include "fraclap/weights.hpp"

namespace fraclap {

// ---------------------------------------------------------------------------
// CSV

/// Scientific notation with ten significant digits.
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), width_(header.size()) {
    line(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) fail(Errc::size_mismatch, "CSV row width differs from header");
    line(cells);
  }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

  std::ostream& os_;
  std::size_t width_;
};

struct ConvergenceRow {
  double h = 0.0;
  double error = 0.0;
  std::optional<double> order;  // log2(E(2h)/E(h)), from the second row on
};

/// Orders from adjacent rows; rows must have halving h.
inline void fill_orders(std::vector<ConvergenceRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].order.reset();
    if (i > 0) rows[i].order = std::log2(rows[i - 1].error / rows[i].error) / std::log2(rows[i - 1].h / rows[i].h);
  }
}

inline void write_convergence(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  CsvWriter w(os, {"h", "E_inf", "order"});
  for (const auto& r : rows) w.row({sci(r.h), sci(r.error), r.order ? sci(*r.order) : ""});
}

// ---------------------------------------------------------------------------
// Config

enum class Experiment { weights, apply_convergence, elliptic, evolve, bench };

inline Experiment parse_experiment(const std::string& s) {
  if (s == "weights") return Experiment::weights;
  if (s == "apply-conv" || s == "apply-convergence") return Experiment::apply_convergence;
  if (s == "elliptic") return Experiment::elliptic;
  if (s == "evolve") return Experiment::evolve;
  if (s == "bench") return Experiment::bench;
  fail(Errc::config, "unknown experiment '" + s + "'");
}

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::weights: return "weights";
    case Experiment::apply_convergence: return "apply-conv";
    case Experiment::elliptic: return "elliptic";
    case Experiment::evolve: return "evolve";
    case Experiment::bench: return "bench";
  }
  return "unknown";
}

struct ExperimentConfig {
  Experiment kind = Experiment::apply_convergence;
  std::string name = "run";
  int dim = 1;
  double lower = -1.0;
  double upper = 1.0;
  std::vector<double> steps;          // grid steps h, strictly decreasing
  std::vector<std::string> alphas;    // preset names or expressions
  OperatorOptions op;
  KrylovConfig krylov;

  // weights
  std::vector<double> orders;
  std::size_t n_max = 64;
  std::size_t m = 0;  // 0: closed form in 1D, default quadrature otherwise

  // apply-conv: optionally extend the grid by `pad` on every side (the
  // Gaussian is nonzero past the box); errors are taken inside the box
  double pad = 0.0;

  // elliptic
  std::string elliptic_case = "manufactured";  // or "richardson"
  double beta = 4.0;
  double h_ref = 1.0 / 512.0;
  double reaction = 1.0;
  std::string rhs = "1";

  // evolve
  std::string scheme = "crank_nicolson";  // or "allen_cahn"
  std::vector<double> dts;  // one per step h; a single value applies to all
  double T = 0.0;
  double kappa = 0.01;
  double diffusivity = 1.0;
  double bubble_radius = 0.07;
  std::string initial = "gaussian";
  std::string mask;
  std::string source;
  bool richardson = false;
  std::size_t frames_every = 0;

  // bench
  std::string bench_kind = "cn_step";  // or "apply"
  std::vector<std::size_t> sizes;
  int reps = 3;
};

namespace detail {

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::vector<std::string> string_list(const nlohmann::json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

}  // namespace detail

/// Fails with Errc::config on unknown experiments, bad shapes, or grid lists
/// that are not strictly refining. Unknown keys are rejected so typos surface.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  static const std::vector<std::string> known{
      "experiment", "name", "dim", "box", "h", "n", "alpha", "mode", "rank", "rank_epsilon", "quadrature",
      "tol", "max_iter", "stagnation", "accept", "orders", "n_max", "m", "pad", "case", "beta", "h_ref", "reaction",
      "rhs", "scheme", "dt", "T", "kappa", "diffusivity", "bubble_radius", "initial", "mask", "source",
      "richardson", "frames_every", "bench", "sizes", "reps"};
  ExperimentConfig c;
  try {
    if (!j.is_object()) fail(Errc::config, "config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
        fail(Errc::config, "unknown config key '" + it.key() + "'");
      }
    }
    c.kind = parse_experiment(j.at("experiment").get<std::string>());
    detail::get_if(j, "name", c.name);
    detail::get_if(j, "dim", c.dim);
    if (c.dim < 1 || c.dim > 3) fail(Errc::config, "dim must be 1, 2 or 3");
    if (j.contains("box")) {
      const auto box = j.at("box").get<std::vector<double>>();
      if (box.size() != 2 || !(box[0] < box[1])) fail(Errc::config, "box must be [lower, upper] with lower < upper");
      c.lower = box[0];
      c.upper = box[1];
    }
    if (j.contains("h")) c.steps = j.at("h").get<std::vector<double>>();
    if (j.contains("n")) {
      if (!c.steps.empty()) fail(Errc::config, "give either h or n, not both");
      for (auto n : j.at("n").get<std::vector<std::size_t>>()) {
        c.steps.push_back((c.upper - c.lower) / static_cast<double>(n + 1));
      }
    }
    for (std::size_t i = 1; i < c.steps.size(); ++i) {
      if (!(c.steps[i] < c.steps[i - 1])) fail(Errc::config, "grid sizes must be strictly increasing");
    }
    if (j.contains("alpha")) c.alphas = detail::string_list(j.at("alpha"));

    std::string mode = "fast";
    detail::get_if(j, "mode", mode);
    if (mode != "fast" && mode != "direct") fail(Errc::config, "mode must be fast or direct");
    c.op.mode = mode == "fast" ? ApplyMode::fast : ApplyMode::direct;
    detail::get_if(j, "rank", c.op.rank);
    detail::get_if(j, "rank_epsilon", c.op.rank_epsilon);
    detail::get_if(j, "quadrature", c.op.quadrature);
    if (c.op.rank < 1) fail(Errc::config, "rank must be at least 1");
    if (c.op.quadrature != 0 && !fft::is_power_of_two(c.op.quadrature)) {
      fail(Errc::config, "quadrature must be a power of two");
    }

    detail::get_if(j, "tol", c.krylov.tol);
    detail::get_if(j, "max_iter", c.krylov.max_iter);
    detail::get_if(j, "stagnation", c.krylov.stagnation);
    detail::get_if(j, "accept", c.krylov.accept);
    if (!(c.krylov.tol > 0.0) || c.krylov.max_iter < 1) fail(Errc::config, "need tol > 0 and max_iter >= 1");

    detail::get_if(j, "orders", c.orders);
    detail::get_if(j, "n_max", c.n_max);
    detail::get_if(j, "m", c.m);
    detail::get_if(j, "pad", c.pad);
    if (!(c.pad >= 0.0)) fail(Errc::config, "pad must be non-negative");

    detail::get_if(j, "case", c.elliptic_case);
    if (c.elliptic_case != "manufactured" && c.elliptic_case != "richardson") {
      fail(Errc::config, "case must be manufactured or richardson");
    }
    detail::get_if(j, "beta", c.beta);
    detail::get_if(j, "h_ref", c.h_ref);
    detail::get_if(j, "reaction", c.reaction);
    detail::get_if(j, "rhs", c.rhs);

    detail::get_if(j, "scheme", c.scheme);
    if (c.scheme != "crank_nicolson" && c.scheme != "allen_cahn") {
      fail(Errc::config, "scheme must be crank_nicolson or allen_cahn");
    }
    if (j.contains("dt")) {
      c.dts = j.at("dt").is_array() ? j.at("dt").get<std::vector<double>>()
                                    : std::vector<double>{j.at("dt").get<double>()};
    }
    detail::get_if(j, "T", c.T);
    detail::get_if(j, "kappa", c.kappa);
    detail::get_if(j, "diffusivity", c.diffusivity);
    detail::get_if(j, "bubble_radius", c.bubble_radius);
    detail::get_if(j, "initial", c.initial);
    detail::get_if(j, "mask", c.mask);
    detail::get_if(j, "source", c.source);
    detail::get_if(j, "richardson", c.richardson);
    detail::get_if(j, "frames_every", c.frames_every);

    detail::get_if(j, "bench", c.bench_kind);
    if (c.bench_kind != "cn_step" && c.bench_kind != "apply") fail(Errc::config, "bench must be cn_step or apply");
    detail::get_if(j, "sizes", c.sizes);
    for (std::size_t i = 1; i < c.sizes.size(); ++i) {
      if (!(c.sizes[i] > c.sizes[i - 1])) fail(Errc::config, "grid sizes must be strictly increasing");
    }
    detail::get_if(j, "reps", c.reps);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad config value: ") + e.what());
  }

  // Presets and expressions must parse now rather than mid-run.
  for (const auto& a : c.alphas) resolve_order(a, c.dim);
  if (c.kind == Experiment::weights && c.orders.empty()) fail(Errc::config, "weights needs orders");
  if (c.kind != Experiment::weights) {
    if (c.alphas.empty()) fail(Errc::config, "alpha is required");
    if (c.kind != Experiment::bench && c.steps.empty()) fail(Errc::config, "h or n is required");
    if (c.kind == Experiment::bench && c.sizes.empty()) fail(Errc::config, "bench needs sizes");
  }
  if (c.kind == Experiment::evolve || (c.kind == Experiment::bench && c.bench_kind == "cn_step")) {
    const std::size_t want = c.kind == Experiment::bench ? c.sizes.size() : c.steps.size();
    if (c.dts.size() != 1 && c.dts.size() != want) fail(Errc::config, "dt needs one value or one per grid");
    if (c.kind == Experiment::evolve && !(c.T > 0.0)) fail(Errc::config, "evolve needs T > 0");
  }
  if (!c.rhs.empty()) Expression check(c.rhs);
  if (!c.source.empty()) Expression check(c.source);
  if (!c.mask.empty()) mask_predicate(c.mask);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::config, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Output label for an order spec: the preset name, or alpha<i>.
inline std::string alpha_label(const ExperimentConfig& c, std::size_t i) {
  const auto& a = c.alphas.at(i);
  if (a == "alpha3" || order_presets().count(a)) return a;
  return "alpha" + std::to_string(i + 1);
}

inline UniformGrid config_grid(const ExperimentConfig& c, double h) {
  return build_grid_with_step(c.dim, c.lower, c.upper, h);
}

// ---------------------------------------------------------------------------
// Experiments

struct WeightSummary {
  double alpha = 0.0;
  double a0 = 0.0;
  double sum = 0.0;
  DecayReport decay;
};

inline WeightTable config_weight_table(const ExperimentConfig& c, double alpha) {
  if (c.dim == 1 && c.m == 0) return weights_1d_closed_form(alpha, c.n_max);
  const std::size_t m = c.m ? c.m : default_quadrature(c.dim, c.n_max);
  return weights_nd_fft(alpha, c.dim, m, QuadratureOptions{c.n_max, 0, QuadratureRoute::automatic});
}

/// One table per order; each dumped as CSV when `dir` is given.
inline std::vector<WeightSummary> run_weights(const ExperimentConfig& c,
                                              const std::optional<std::filesystem::path>& dir = {}) {
  std::vector<WeightSummary> out;
  for (double a : c.orders) {
    const WeightTable t = config_weight_table(c, a);
    WeightSummary s{a, t.at(0, 0, 0), t.sum(), {}};
    if (c.dim == 1 && t.extent() >= 16) s.decay = check_decay(t);
    if (dir) {
      std::ofstream os(*dir / (c.name + "_alpha" + sci(a).substr(0, 6) + ".csv"));
      write_csv(t, os);
    }
    out.push_back(s);
  }
  return out;
}

/// Max-node error of the discrete operator applied to exp(-|x|^2) against
/// the closed form, one row per grid step. Nodes of the padded grid outside
/// the box carry the Gaussian too; only nodes inside the box are scored.
inline std::vector<ConvergenceRow> run_apply_convergence(const ExperimentConfig& c, const std::string& alpha) {
  std::vector<ConvergenceRow> rows;
  const Expression e = resolve_order(alpha, c.dim);
  for (double h : c.steps) {
    const double shift = c.pad / h;
    if (std::abs(shift - std::round(shift)) > 1e-9 * std::max(1.0, shift)) {
      fail(Errc::config, "pad must be a whole number of steps");
    }
    const UniformGrid g = build_grid_with_step(c.dim, c.lower - c.pad, c.upper + c.pad, h);
    const VariableOrderOperator op(g, order_field(e.rule(), 0.0, 2.0), c.op);
    const GridFunction u = sample(g, initial_rule("gaussian"));
    const GridFunction v = op.apply(u);
    const double slack = 1e-9 * h;
    double err = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const Point x = g.point(j);
      bool inside = true;
      for (int p = 0; p < c.dim; ++p) inside = inside && x[p] > c.lower - slack && x[p] < c.upper + slack;
      if (!inside) continue;
      const std::span<const double> xs(x.data(), c.dim);
      err = std::max(err, std::abs(v[j] - gaussian_frac_lap(xs, op.order().sampled[j], c.dim)));
    }
    rows.push_back({h, err, {}});
  }
  fill_orders(rows);
  return rows;
}

struct EllipticRun {
  std::vector<ConvergenceRow> rows;
  std::vector<int> iterations;  // Krylov iterations per solved grid
};

namespace detail {

inline GridFunction elliptic_solution(const ExperimentConfig& c, const OrderField& field, const UniformGrid& g,
                                      const GridFunction& f, int* iterations) {
  const VariableOrderOperator op(g, field, c.op);
  const std::vector<double> b(g.size(), c.reaction);
  auto res = solve_elliptic(op, c.reaction > 0.0 ? std::span<const double>(b) : std::span<const double>(), f.values,
                            c.krylov);
  if (iterations) *iterations = res.krylov.iterations;
  return std::move(res.u);
}

}  // namespace detail

/// Case "manufactured": u = prod (1 - x_p^2)^beta with the right-hand side
/// from the operator at h_ref, E = |u_h - u|. Case "richardson": f from the
/// rhs expression, E(h) = |u_h - u_{h/2}| at the coarse nodes.
inline EllipticRun run_elliptic(const ExperimentConfig& c, const std::string& alpha) {
  EllipticRun run;
  const Expression e = resolve_order(alpha, c.dim);
  const OrderField field = order_field(e.rule(), 0.0, 2.0);
  if (c.elliptic_case == "manufactured") {
    const UniformGrid coarsest = config_grid(c, c.steps.front());
    const GridFunction fine = manufactured_fine(coarsest, field, c.beta, c.h_ref, c.reaction, c.op);
    for (double h : c.steps) {
      const UniformGrid g = config_grid(c, h);
      int its = 0;
      const GridFunction u = detail::elliptic_solution(c, field, g, restrict_to(g, fine), &its);
      double err = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const Point x = g.point(j);
        double exact = 1.0;
        for (int p = 0; p < c.dim; ++p) exact *= std::pow(1.0 - x[p] * x[p], c.beta);
        err = std::max(err, std::abs(u[j] - exact));
      }
      run.rows.push_back({h, err, {}});
      run.iterations.push_back(its);
    }
  } else {
    const Expression rhs(c.rhs);
    std::vector<GridFunction> sols;
    std::vector<double> hs = c.steps;
    hs.push_back(0.5 * c.steps.back());
    for (double h : hs) {
      const UniformGrid g = config_grid(c, h);
      int its = 0;
      sols.push_back(detail::elliptic_solution(c, field, g, sample(g, rhs.rule()), &its));
      run.iterations.push_back(its);
    }
    for (std::size_t i = 0; i < c.steps.size(); ++i) {
      const UniformGrid& g = sols[i].grid;
      const GridFunction finer = restrict_to(g, sols[i + 1]);
      run.rows.push_back({c.steps[i], max_abs_diff(sols[i].values, finer.values), {}});
    }
  }
  fill_orders(run.rows);
  return run;
}

inline TimeStepper config_stepper(const ExperimentConfig& c, double dt) {
  TimeStepper st;
  st.scheme = c.scheme == "allen_cahn" ? Scheme::three_level : Scheme::crank_nicolson;
  st.dt = dt;
  st.T = c.T;
  st.kappa = c.kappa;
  st.diffusivity = c.diffusivity;
  st.krylov = c.krylov;
  if (!c.source.empty()) {
    const Expression src(c.source);
    st.source = [src](std::span<const double> x, double t) { return src(x, t); };
  }
  return st;
}

inline double config_dt(const ExperimentConfig& c, std::size_t i) { return c.dts.size() == 1 ? c.dts[0] : c.dts[i]; }

inline VariableOrderOperator config_operator(const ExperimentConfig& c, const UniformGrid& g, const std::string& alpha) {
  std::optional<DomainMask> mask;
  if (!c.mask.empty()) mask = make_mask(g, mask_predicate(c.mask));
  return VariableOrderOperator(g, order_from_spec(alpha, c.dim), c.op, std::move(mask));
}

inline std::vector<double> config_initial(const ExperimentConfig& c, const UniformGrid& g) {
  GridFunction u0 = sample(g, initial_rule(c.initial, InitialOptions{c.kappa, c.bubble_radius}));
  if (!c.mask.empty()) {
    const DomainMask m = make_mask(g, mask_predicate(c.mask));
    const double outside = c.scheme == "allen_cahn" ? -1.0 : 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!m[j]) u0[j] = outside;
    }
  }
  return std::move(u0.values);
}

/// One trajectory on the grid with step h.
inline Trajectory run_trajectory(const ExperimentConfig& c, const std::string& alpha, std::size_t grid_index,
                                 const FrameSink& frames = {}) {
  const UniformGrid g = config_grid(c, c.steps.at(grid_index));
  const VariableOrderOperator op = config_operator(c, g, alpha);
  return evolve(config_stepper(c, config_dt(c, grid_index)), op, config_initial(c, g), frames,
                std::max<std::size_t>(1, c.frames_every));
}

struct RichardsonRow {
  double h = 0.0;
  double dt = 0.0;
  double error = 0.0;
  std::optional<double> order;
};

/// |u^N(dt, h) - u^N(dt/2, h/2)| at the coarse nodes for each configured
/// (h, dt), halving both together.
inline std::vector<RichardsonRow> run_richardson(const ExperimentConfig& c, const std::string& alpha) {
  std::vector<std::vector<double>> finals;
  std::vector<UniformGrid> grids;
  for (std::size_t i = 0; i <= c.steps.size(); ++i) {
    const double h = i < c.steps.size() ? c.steps[i] : 0.5 * c.steps.back();
    const double dt = i < c.steps.size() ? config_dt(c, i) : 0.5 * config_dt(c, c.steps.size() - 1);
    const UniformGrid g = config_grid(c, h);
    const VariableOrderOperator op = config_operator(c, g, alpha);
    finals.push_back(evolve(config_stepper(c, dt), op, config_initial(c, g)).final_state);
    grids.push_back(g);
  }
  std::vector<ConvergenceRow> conv;
  std::vector<RichardsonRow> rows;
  for (std::size_t i = 0; i < c.steps.size(); ++i) {
    const GridFunction finer = restrict_to(grids[i], GridFunction(grids[i + 1], finals[i + 1]));
    const double err = max_abs_diff(finals[i], finer.values);
    conv.push_back({c.steps[i], err, {}});
    rows.push_back({c.steps[i], config_dt(c, i), err, {}});
  }
  fill_orders(conv);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].order = conv[i].order;
  return rows;
}

struct BenchRow {
  std::size_t n = 0;
  int dim = 1;
  int rank = 1;
  double dt = 0.0;
  double seconds = 0.0;
  int iterations = 0;  // Krylov iterations for cn_step, 0 for apply
  int applies = 0;
};

/// cn_step: one Crank-Nicolson step from the configured initial data on the
/// box with N^d nodes per size. apply: best-of-reps fast apply time.
inline std::vector<BenchRow> run_bench(const ExperimentConfig& c, const std::string& alpha) {
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < c.sizes.size(); ++i) {
    const std::size_t n = c.sizes[i];
    const UniformGrid g = build_grid(c.dim, c.lower, c.upper, n);
    const VariableOrderOperator op = config_operator(c, g, alpha);
    BenchRow r{n, c.dim, op.has_fast_plan() ? op.plan().rank : 0, 0.0, 0.0, 0, 0};
    if (c.bench_kind == "apply") {
      r.seconds = operator_timing(op, c.reps).seconds_per_apply;
    } else {
      TimeStepper st = config_stepper(c, config_dt(c, i));
      st.T = st.dt;
      r.dt = st.dt;
      const std::vector<double> u0 = config_initial(c, g);
      StepInfo info;
      const auto t0 = std::chrono::steady_clock::now();
      step_crank_nicolson(u0, 0.0, st, op, &info);
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.iterations = info.iterations;
      r.applies = info.applies;
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Driver shared by the CLI

inline void write_observers(std::ostream& os, const Trajectory& tr) {
  CsvWriter w(os, {"step", "time", "max_norm", "l2", "mass", "components", "iterations"});
  for (const auto& r : tr.rows) {
    w.row({std::to_string(r.step), sci(r.time), sci(r.max_norm), sci(r.l2), sci(r.mass),
           std::to_string(r.components), std::to_string(r.iterations)});
  }
}

inline void write_frame(const std::filesystem::path& file, const UniformGrid& g, std::span<const double> u) {
  std::ofstream os(file);
  const std::size_t row = g.n[g.dim - 1];
  for (std::size_t j = 0; j < u.size(); ++j) {
    os << sci(u[j]) << ((j + 1) % row == 0 ? "\n" : " ");
  }
}

/// Runs the configured experiment for every order spec and writes one CSV
/// per spec into `dir`. Returns the written paths.
inline std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& stem) {
    written.push_back(dir / (stem + ".csv"));
    std::ofstream os(written.back());
    if (!os) fail(Errc::config, "cannot write " + written.back().string());
    return os;
  };

  if (c.kind == Experiment::weights) {
    const auto summary = run_weights(c, dir);
    auto os = open(c.name + "_summary");
    CsvWriter w(os, {"alpha", "dim", "a0", "sum", "decay_min", "decay_max"});
    for (const auto& s : summary) {
      w.row({sci(s.alpha), std::to_string(c.dim), sci(s.a0), sci(s.sum), sci(s.decay.min_scaled),
             sci(s.decay.max_scaled)});
    }
    return written;
  }

  for (std::size_t i = 0; i < c.alphas.size(); ++i) {
    const std::string stem = c.name + "_" + alpha_label(c, i);
    switch (c.kind) {
      case Experiment::apply_convergence: {
        const auto rows = run_apply_convergence(c, c.alphas[i]);
        auto os = open(stem);
        write_convergence(os, rows);
        break;
      }
      case Experiment::elliptic: {
        const auto run = run_elliptic(c, c.alphas[i]);
        auto os = open(stem);
        write_convergence(os, run.rows);
        break;
      }
      case Experiment::evolve: {
        if (c.richardson) {
          const auto rows = run_richardson(c, c.alphas[i]);
          auto os = open(stem);
          CsvWriter w(os, {"h", "dt", "error", "order"});
          for (const auto& r : rows) w.row({sci(r.h), sci(r.dt), sci(r.error), r.order ? sci(*r.order) : ""});
          break;
        }
        for (std::size_t k = 0; k < c.steps.size(); ++k) {
          const std::string run_stem = c.steps.size() == 1 ? stem : stem + "_grid" + std::to_string(k);
          FrameSink frames;
          if (c.frames_every > 0) {
            const auto fdir = dir / (run_stem + "_frames");
            std::filesystem::create_directories(fdir);
            const UniformGrid g = config_grid(c, c.steps[k]);
            frames = [fdir, g](std::size_t step, double, std::span<const double> u) {
              char name[32];
              std::snprintf(name, sizeof name, "step_%06zu.txt", step);
              write_frame(fdir / name, g, u);
            };
          }
          const auto tr = run_trajectory(c, c.alphas[i], k, frames);
          auto os = open(run_stem);
          write_observers(os, tr);
        }
        break;
      }
      case Experiment::bench: {
        const auto rows = run_bench(c, c.alphas[i]);
        auto os = open(stem);
        if (c.bench_kind == "apply") {
          CsvWriter w(os, {"N", "dim", "rank", "seconds_per_apply"});
          for (const auto& r : rows) w.row({std::to_string(r.n), std::to_string(r.dim), std::to_string(r.rank), sci(r.seconds)});
        } else {
          CsvWriter w(os, {"N", "dim", "dt", "seconds", "iterations", "applies"});
          for (const auto& r : rows) {
            w.row({std::to_string(r.n), std::to_string(r.dim), sci(r.dt), sci(r.seconds), std::to_string(r.iterations),
                   std::to_string(r.applies)});
          }
        }
        break;
      }
      case Experiment::weights: break;
    }
  }
  return written;
}

}  // namespace fraclap
