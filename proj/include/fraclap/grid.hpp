#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fraclap/error.hpp"

namespace fraclap {

using Point = std::array<double, 3>;

/// Tensor-product grid of interior nodes on a box. Boundary nodes are not
/// unknowns: node j (1-based) in dimension p sits at lower[p] + j * h[p] with
/// h[p] = (upper[p] - lower[p]) / (n[p] + 1). Unused dimensions carry n = 1.
/// Flat indices are lexicographic with the last dimension fastest.
struct UniformGrid {
  int dim = 1;
  std::array<double, 3> lower{0.0, 0.0, 0.0};
  std::array<double, 3> upper{1.0, 1.0, 1.0};
  std::array<std::size_t, 3> n{1, 1, 1};
  std::array<double, 3> h{1.0, 1.0, 1.0};

  std::size_t size() const { return n[0] * n[1] * n[2]; }

  double coordinate(int p, std::size_t j) const {
    return lower[p] + static_cast<double>(j + 1) * h[p];
  }

  std::array<std::size_t, 3> unravel(std::size_t flat) const {
    std::array<std::size_t, 3> idx{0, 0, 0};
    idx[2] = flat % n[2];
    flat /= n[2];
    idx[1] = flat % n[1];
    idx[0] = flat / n[1];
    return idx;
  }

  std::size_t ravel(const std::array<std::size_t, 3>& idx) const {
    return (idx[0] * n[1] + idx[1]) * n[2] + idx[2];
  }

  /// Coordinates of a node in its first `dim` slots; remaining slots are zero.
  Point point(std::size_t flat) const {
    const auto idx = unravel(flat);
    Point x{0.0, 0.0, 0.0};
    for (int p = 0; p < dim; ++p) x[p] = coordinate(p, idx[p]);
    return x;
  }

  /// Largest per-dimension node count.
  std::size_t max_n() const { return *std::max_element(n.begin(), n.begin() + dim); }

  /// Step of an isotropic grid; throws if the per-dimension steps differ.
  double step() const {
    for (int p = 1; p < dim; ++p) {
      if (std::abs(h[p] - h[0]) > 1e-12 * h[0]) {
        fail(Errc::grid_mismatch, "operator requires equal steps in every dimension");
      }
    }
    return h[0];
  }

  double cell_volume() const {
    double v = 1.0;
    for (int p = 0; p < dim; ++p) v *= h[p];
    return v;
  }

  friend bool operator==(const UniformGrid& a, const UniformGrid& b) {
    if (a.dim != b.dim) return false;
    for (int p = 0; p < a.dim; ++p) {
      if (a.n[p] != b.n[p] || a.lower[p] != b.lower[p] || a.upper[p] != b.upper[p]) return false;
    }
    return true;
  }
};

inline UniformGrid build_grid(int dim, std::span<const double> lower, std::span<const double> upper,
                              std::span<const std::size_t> n_per_dim) {
  if (dim < 1 || dim > 3) fail(Errc::invalid_dim, "dimension must be 1, 2 or 3");
  if (lower.size() < static_cast<std::size_t>(dim) || upper.size() < static_cast<std::size_t>(dim) ||
      n_per_dim.size() < static_cast<std::size_t>(dim)) {
    fail(Errc::invalid_dim, "box bounds and node counts must cover every dimension");
  }
  UniformGrid g;
  g.dim = dim;
  for (int p = 0; p < dim; ++p) {
    if (!std::isfinite(lower[p]) || !std::isfinite(upper[p]) || !(lower[p] < upper[p])) {
      fail(Errc::invalid_box, "need finite bounds with lower < upper in dimension " + std::to_string(p));
    }
    if (n_per_dim[p] < 1) fail(Errc::invalid_dim, "need at least one interior node per dimension");
    g.lower[p] = lower[p];
    g.upper[p] = upper[p];
    g.n[p] = n_per_dim[p];
    g.h[p] = (upper[p] - lower[p]) / static_cast<double>(n_per_dim[p] + 1);
  }
  return g;
}

/// Cube [lower, upper]^dim with n interior nodes per dimension.
inline UniformGrid build_grid(int dim, double lower, double upper, std::size_t n) {
  const std::array<double, 3> lo{lower, lower, lower};
  const std::array<double, 3> hi{upper, upper, upper};
  const std::array<std::size_t, 3> nn{n, n, n};
  return build_grid(dim, lo, hi, nn);
}

/// Cube grid with prescribed step: n = (upper - lower)/h - 1 interior nodes.
inline UniformGrid build_grid_with_step(int dim, double lower, double upper, double h) {
  const double cells = (upper - lower) / h;
  const double rounded = std::round(cells);
  if (!(h > 0.0) || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells) || rounded < 2.0) {
    fail(Errc::invalid_box, "step does not divide the box into at least two cells");
  }
  return build_grid(dim, lower, upper, static_cast<std::size_t>(rounded) - 1);
}

using PointRule = std::function<double(std::span<const double>)>;

/// Variable order alpha(x). Holds the rule and, once sampled on a grid, the
/// per-node values; downstream modules only ever read the samples.
struct OrderField {
  PointRule rule;
  double alpha_min = 0.0;  // declared (or, after sampling, tight) bounds
  double alpha_max = 2.0;
  std::vector<double> sampled;

  bool is_sampled() const { return !sampled.empty(); }
};

inline OrderField order_field(PointRule rule, double alpha_min = 0.0, double alpha_max = 2.0) {
  return OrderField{std::move(rule), alpha_min, alpha_max, {}};
}

inline OrderField constant_order(double alpha) {
  return OrderField{[alpha](std::span<const double>) { return alpha; }, alpha, alpha, {}};
}

inline void check_order_value(double a) {
  if (!std::isfinite(a) || a <= 0.0 || a > 2.0) {
    fail(Errc::order_out_of_range, "order " + std::to_string(a) + " outside (0, 2]");
  }
}

inline OrderField sample_order(const OrderField& field, const UniformGrid& grid) {
  OrderField out{field.rule, field.alpha_min, field.alpha_max, {}};
  out.sampled.resize(grid.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Point x = grid.point(j);
    const double a = field.rule(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dim)));
    check_order_value(a);
    out.sampled[j] = a;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  if (lo < field.alpha_min - 1e-14 || hi > field.alpha_max + 1e-14) {
    fail(Errc::order_out_of_range, "sampled order leaves the declared bounds");
  }
  out.alpha_min = lo;
  out.alpha_max = hi;
  return out;
}

/// Values on interior nodes, implicitly zero outside the box.
struct GridFunction {
  UniformGrid grid;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(const UniformGrid& g) : grid(g), values(g.size(), 0.0) {}
  GridFunction(const UniformGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) fail(Errc::size_mismatch, "value count does not match grid");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }
};

inline GridFunction sample(const UniformGrid& grid, const PointRule& rule) {
  GridFunction f(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Point x = grid.point(j);
    f[j] = rule(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dim)));
  }
  return f;
}

inline double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(Errc::size_mismatch, "vectors differ in length");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Embedding of an irregular domain in the box: true marks an unknown,
/// false a node held at zero.
struct DomainMask {
  UniformGrid grid;
  std::vector<char> inside;
  std::size_t count = 0;

  bool operator[](std::size_t j) const { return inside[j] != 0; }

  void apply(std::span<double> v) const {
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (!inside[j]) v[j] = 0.0;
    }
  }
};

using PointPredicate = std::function<bool(std::span<const double>)>;

inline DomainMask make_mask(const UniformGrid& grid, const PointPredicate& predicate) {
  DomainMask m{grid, std::vector<char>(grid.size(), 0), 0};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Point x = grid.point(j);
    if (predicate(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dim)))) {
      m.inside[j] = 1;
      ++m.count;
    }
  }
  if (m.count == 0) fail(Errc::empty_domain, "mask selects no interior node");
  return m;
}

}  // namespace fraclap
