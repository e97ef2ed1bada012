#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/fft.hpp"

namespace fraclap {

/// Discrete symbol of the second-difference Laplacian,
/// sum_p (4/h^2) sin^2(xi_p h / 2).
inline double symbol(std::span<const double> xi, double h) {
  double s = 0.0;
  for (double x : xi) {
    const double t = std::sin(0.5 * x * h);
    s += 4.0 * t * t;
  }
  return s / (h * h);
}

/// Finite-difference weights a_n of one constant order. Weights are even in
/// every component of n, so only the non-negative orthant n_p in
/// [0, extent] is stored. A table built by full trapezoidal quadrature with
/// extent == M/2 is "complete": it holds every distinct value of the
/// M-periodic sequence, and any signed index is reduced modulo M.
class WeightTable {
 public:
  WeightTable() = default;
  WeightTable(double alpha, int dim, std::size_t quadrature, std::size_t extent, std::vector<double> quadrant)
      : alpha_(alpha), dim_(dim), m_(quadrature), extent_(extent), quadrant_(std::move(quadrant)) {
    const std::size_t k1 = extent_ + 1;
    if (dim_ == 2) stride_ = {k1, 1, 0};
    if (dim_ == 3) stride_ = {k1 * k1, k1, 1};
    std::size_t expected = k1;
    for (int p = 1; p < dim_; ++p) expected *= k1;
    if (quadrant_.size() != expected) fail(Errc::size_mismatch, "weight quadrant has the wrong length");
  }

  double alpha() const { return alpha_; }
  int dim() const { return dim_; }
  /// Quadrature size M; zero for closed-form tables.
  std::size_t quadrature() const { return m_; }
  std::size_t extent() const { return extent_; }
  bool complete() const { return m_ != 0 && extent_ == m_ / 2; }
  std::span<const double> quadrant() const { return quadrant_; }

  /// Weight at a signed multi-index.
  double at(std::span<const long> n) const {
    std::size_t flat = 0;
    for (int p = 0; p < dim_; ++p) flat += reduce(n[p]) * stride_[p];
    return quadrant_[flat];
  }
  double at(long n0, long n1 = 0, long n2 = 0) const {
    const std::array<long, 3> n{n0, n1, n2};
    return at(std::span<const long>(n.data(), 3));
  }

  /// Weight at a non-negative orthant offset (no reduction, no checks).
  double at_offset(std::size_t o0, std::size_t o1 = 0, std::size_t o2 = 0) const {
    return quadrant_[o0 * stride_[0] + o1 * stride_[1] + o2 * stride_[2]];
  }

  /// Sum over every stored signed index |n_p| <= extent. For complete tables
  /// this is the sum of all M^d periodic values.
  double sum() const {
    double s = 0.0;
    const std::size_t k1 = extent_ + 1;
    const std::size_t n1 = dim_ >= 2 ? k1 : 1;
    const std::size_t n2 = dim_ >= 3 ? k1 : 1;
    for (std::size_t i = 0; i < k1; ++i)
      for (std::size_t j = 0; j < n1; ++j)
        for (std::size_t k = 0; k < n2; ++k)
          s += multiplicity(i) * (dim_ >= 2 ? multiplicity(j) : 1.0) * (dim_ >= 3 ? multiplicity(k) : 1.0) *
               at_offset(i, j, k);
    return s;
  }

  /// Largest imaginary part discarded by the complex quadrature route.
  double imag_residue() const { return imag_residue_; }
  /// Largest |a_n - a_{-n}| seen over the full periodic table (complex route).
  double symmetry_defect() const { return symmetry_defect_; }

  void set_diagnostics(double imag_residue, double symmetry_defect) {
    imag_residue_ = imag_residue;
    symmetry_defect_ = symmetry_defect;
  }

 private:
  std::size_t reduce(long n) const {
    long a = n < 0 ? -n : n;
    if (complete()) {
      const long m = static_cast<long>(m_);
      a %= m;
      if (a > m / 2) a = m - a;
    }
    if (static_cast<std::size_t>(a) > extent_) {
      fail(Errc::missing_weights, "offset " + std::to_string(n) + " beyond table extent " + std::to_string(extent_));
    }
    return static_cast<std::size_t>(a);
  }

  double multiplicity(std::size_t k) const {
    if (k == 0) return 1.0;
    if (complete() && k == m_ / 2) return 1.0;
    return 2.0;
  }

  double alpha_ = 0.0;
  int dim_ = 1;
  std::size_t m_ = 0;
  std::size_t extent_ = 0;
  std::vector<double> quadrant_;
  std::array<std::size_t, 3> stride_{1, 0, 0};
  double imag_residue_ = 0.0;
  double symmetry_defect_ = 0.0;
};

inline void check_weight_order(double alpha) {
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha > 2.0) {
    fail(Errc::order_out_of_range, "weight order " + std::to_string(alpha) + " outside (0, 2]");
  }
}

/// Exact 1D weights, a_0 = Gamma(alpha+1)/Gamma(alpha/2+1)^2 followed by the
/// pole-free ratio a_{n+1} = a_n (n - alpha/2)/(n + 1 + alpha/2).
inline WeightTable weights_1d_closed_form(double alpha, std::size_t n_max) {
  check_weight_order(alpha);
  if (n_max < 1) fail(Errc::invalid_range, "closed-form table needs n_max >= 1");
  std::vector<double> a(n_max + 1);
  const double g = std::tgamma(0.5 * alpha + 1.0);
  a[0] = std::tgamma(alpha + 1.0) / (g * g);
  const double half = 0.5 * alpha;
  for (std::size_t n = 0; n < n_max; ++n) {
    const double nd = static_cast<double>(n);
    a[n + 1] = a[n] * (nd - half) / (nd + 1.0 + half);
  }
  return WeightTable(alpha, 1, 0, n_max, std::move(a));
}

enum class QuadratureRoute {
  automatic,     // complex DFT when M^d is small, even cosine route otherwise
  complex_dft,   // full d-dimensional complex inverse DFT of the sampled symbol
  even_cosine,   // tensor DCT-I over the non-negative orthant, truncated per pass
};

struct QuadratureOptions {
  std::size_t extent = 0;    // largest |n_p| to keep; 0 keeps the complete table (M/2)
  std::size_t target_n = 0;  // interior node count of the target grid, 0 if none declared
  QuadratureRoute route = QuadratureRoute::automatic;
};

/// Default quadrature size: 2^14 in 1D/2D, 4N rounded to a power of two in
/// 3D, and never below the 2N needed to keep aliasing out of the used range.
inline std::size_t default_quadrature(int dim, std::size_t n) {
  const std::size_t floor2n = fft::next_power_of_two(2 * n);
  if (dim <= 2) return std::max<std::size_t>(std::size_t{1} << 14, floor2n);
  return std::max(fft::next_power_of_two(4 * n), floor2n);
}

namespace detail {

// phi(eta) = (sum_p 4 sin^2(eta_p/2))^{alpha/2} on the grid eta = k * 2pi/M.
inline std::vector<double> half_sine_table(std::size_t m, std::size_t count) {
  std::vector<double> s(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(m));
    s[k] = 4.0 * t * t;
  }
  return s;
}

inline WeightTable weights_complex_dft(double alpha, int dim, std::size_t m, std::size_t extent) {
  const std::size_t md = dim == 1 ? m : (dim == 2 ? m * m : m * m * m);
  const auto s = half_sine_table(m, m);
  fft::Buffer<fft::Complex> buf(md);
  const double half = 0.5 * alpha;
  for (std::size_t flat = 0; flat < md; ++flat) {
    std::size_t rest = flat;
    double sum = 0.0;
    for (int p = 0; p < dim; ++p) {
      sum += s[rest % m];
      rest /= m;
    }
    buf[flat] = fft::Complex(std::pow(sum, half), 0.0);
  }
  const int n[3] = {static_cast<int>(m), static_cast<int>(m), static_cast<int>(m)};
  auto plan = fft::make_plan([&] {
    return fftw_plan_dft(dim, n, fft::as_fftw(buf.data()), fft::as_fftw(buf.data()), FFTW_BACKWARD,
                         FFTW_ESTIMATE);
  });
  fftw_execute_dft(plan.get(), fft::as_fftw(buf.data()), fft::as_fftw(buf.data()));
  const double scale = 1.0 / static_cast<double>(md);
  double imag = 0.0;
  for (auto& z : buf) {
    z *= scale;
    imag = std::max(imag, std::abs(z.imag()));
  }
  if (imag > 1e-12) {
    fail(Errc::invalid_quadrature, "imaginary residue " + std::to_string(imag) + " exceeds 1e-12");
  }
  // symmetry: a_n against a_{-n} over the whole periodic table
  double defect = 0.0;
  for (std::size_t flat = 0; flat < md; ++flat) {
    std::size_t rest = flat, mirror = 0, scale_p = 1;
    for (int p = 0; p < dim; ++p) {
      const std::size_t k = rest % m;
      rest /= m;
      mirror += ((m - k) % m) * scale_p;
      scale_p *= m;
    }
    defect = std::max(defect, std::abs(buf[flat].real() - buf[mirror].real()));
  }
  const std::size_t k1 = extent + 1;
  const std::size_t qn = dim == 1 ? k1 : (dim == 2 ? k1 * k1 : k1 * k1 * k1);
  std::vector<double> quadrant(qn);
  for (std::size_t q = 0; q < qn; ++q) {
    std::size_t rest = q, src = 0, scale_p = 1;
    // quadrant is lexicographic with last dim fastest; FFTW layout is the same
    for (int p = dim - 1; p >= 0; --p) {
      src += (rest % k1) * scale_p;
      rest /= k1;
      scale_p *= m;
    }
    quadrant[q] = buf[src].real();
  }
  WeightTable t(alpha, dim, m, extent, std::move(quadrant));
  t.set_diagnostics(imag, defect);
  return t;
}

// Row-column DCT-I: transform the trailing d-1 dimensions slab by slab,
// keep [0, extent] of each, then transform the leading dimension of the
// kept columns. Memory is (M/2+1) * (extent+1)^{d-1} plus one slab.
inline WeightTable weights_even_cosine(double alpha, int dim, std::size_t m, std::size_t extent) {
  const std::size_t len = m / 2 + 1;
  const std::size_t k1 = extent + 1;
  const auto s = half_sine_table(m, len);
  const double half = 0.5 * alpha;
  const double scale = 1.0 / std::pow(static_cast<double>(m), dim);
  const int ilen = static_cast<int>(len);

  if (dim == 1) {
    fft::Buffer<double> row(len);
    for (std::size_t k = 0; k < len; ++k) row[k] = std::pow(s[k], half);
    auto plan = fft::make_plan(
        [&] { return fftw_plan_r2r_1d(ilen, row.data(), row.data(), FFTW_REDFT00, FFTW_ESTIMATE); });
    fftw_execute_r2r(plan.get(), row.data(), row.data());
    std::vector<double> q(k1);
    for (std::size_t k = 0; k < k1; ++k) q[k] = row[k] * scale;
    return WeightTable(alpha, 1, m, extent, std::move(q));
  }

  const std::size_t slab_len = dim == 2 ? len : len * len;
  const std::size_t kept = dim == 2 ? k1 : k1 * k1;
  if (static_cast<double>(slab_len) * 8.0 > 1.5e9 || static_cast<double>(len * kept) * 8.0 > 1.5e9) {
    fail(Errc::invalid_quadrature, "quadrature size too large for the even cosine route in this dimension");
  }
  fft::Buffer<double> slab(slab_len);
  fft::Buffer<double> columns(len * kept);
  const int slab_n[2] = {ilen, ilen};
  const fftw_r2r_kind kinds[2] = {FFTW_REDFT00, FFTW_REDFT00};
  auto slab_plan = fft::make_plan(
      [&] { return fftw_plan_r2r(dim - 1, slab_n, slab.data(), slab.data(), kinds, FFTW_ESTIMATE); });
  for (std::size_t k0 = 0; k0 < len; ++k0) {
    if (dim == 2) {
      for (std::size_t k = 0; k < len; ++k) slab[k] = std::pow(s[k0] + s[k], half);
    } else {
      for (std::size_t a = 0; a < len; ++a)
        for (std::size_t b = 0; b < len; ++b) slab[a * len + b] = std::pow(s[k0] + s[a] + s[b], half);
    }
    fftw_execute_r2r(slab_plan.get(), slab.data(), slab.data());
    double* dst = columns.data() + k0 * kept;
    if (dim == 2) {
      std::copy_n(slab.data(), k1, dst);
    } else {
      for (std::size_t a = 0; a < k1; ++a) std::copy_n(slab.data() + a * len, k1, dst + a * k1);
    }
  }
  const int col_n[1] = {ilen};
  auto col_plan = fft::make_plan([&] {
    return fftw_plan_many_r2r(1, col_n, static_cast<int>(kept), columns.data(), nullptr, static_cast<int>(kept), 1,
                              columns.data(), nullptr, static_cast<int>(kept), 1, kinds, FFTW_ESTIMATE);
  });
  fftw_execute_r2r(col_plan.get(), columns.data(), columns.data());
  std::vector<double> q(k1 * kept);
  for (std::size_t i = 0; i < k1 * kept; ++i) q[i] = columns[i] * scale;
  return WeightTable(alpha, dim, m, extent, std::move(q));
}

}  // namespace detail

/// Weights of any dimension by the M-point trapezoidal rule on [-pi, pi]^d,
/// evaluated as an inverse DFT of the sampled symbol power.
inline WeightTable weights_nd_fft(double alpha, int dim, std::size_t m, QuadratureOptions opts = {}) {
  check_weight_order(alpha);
  if (dim < 1 || dim > 3) fail(Errc::invalid_dim, "dimension must be 1, 2 or 3");
  if (!fft::is_power_of_two(m) || m < 2) fail(Errc::invalid_quadrature, "quadrature size must be a power of two >= 2");
  if (opts.target_n != 0 && m < 2 * opts.target_n) {
    fail(Errc::quadrature_too_coarse,
         "M = " + std::to_string(m) + " below 2N = " + std::to_string(2 * opts.target_n));
  }
  const std::size_t extent = opts.extent == 0 ? m / 2 : std::min(opts.extent, m / 2);
  auto route = opts.route;
  if (route == QuadratureRoute::automatic) {
    const double md = std::pow(static_cast<double>(m), dim);
    route = md <= static_cast<double>(std::size_t{1} << 22) ? QuadratureRoute::complex_dft
                                                            : QuadratureRoute::even_cosine;
  }
  if (route == QuadratureRoute::complex_dft) return detail::weights_complex_dft(alpha, dim, m, extent);
  return detail::weights_even_cosine(alpha, dim, m, extent);
}

struct DecayReport {
  bool degenerate = false;  // no decaying tail (alpha = 2 stencil)
  bool ok = false;
  std::size_t n_lo = 0, n_hi = 0;
  double min_scaled = 0.0;  // min over n of |a_n| n^{alpha+d}
  double max_scaled = 0.0;
};

/// Boundedness of |a_n| n^{alpha+d} along the first axis for 4 <= n <= extent/2.
inline DecayReport check_decay(const WeightTable& table) {
  DecayReport r;
  r.n_lo = 4;
  r.n_hi = table.extent() / 2;
  if (table.extent() < 16) fail(Errc::invalid_range, "decay check needs a table extent of at least 16");
  double tail = 0.0;
  for (std::size_t n = r.n_lo; n <= r.n_hi; ++n) tail = std::max(tail, std::abs(table.at_offset(n)));
  if (tail < 1e-14) {
    r.degenerate = true;
    return r;
  }
  const double power = table.alpha() + table.dim();
  r.min_scaled = std::numeric_limits<double>::infinity();
  for (std::size_t n = r.n_lo; n <= r.n_hi; ++n) {
    const double v = std::abs(table.at_offset(n)) * std::pow(static_cast<double>(n), power);
    r.min_scaled = std::min(r.min_scaled, v);
    r.max_scaled = std::max(r.max_scaled, v);
  }
  r.ok = std::isfinite(r.max_scaled) && r.min_scaled > 0.0 && r.max_scaled <= 10.0 * r.min_scaled;
  return r;
}

/// CSV dump: columns n_1..n_d,value over the signed index range, rows in
/// lexicographic order (last index fastest).
inline void write_csv(const WeightTable& t, std::ostream& os) {
  const long k = static_cast<long>(t.extent());
  for (int p = 0; p < t.dim(); ++p) os << "n_" << (p + 1) << ",";
  os << "value\n";
  const long lo1 = t.dim() >= 2 ? -k : 0, lo2 = t.dim() >= 3 ? -k : 0;
  const long hi1 = t.dim() >= 2 ? k : 0, hi2 = t.dim() >= 3 ? k : 0;
  char buf[64];
  for (long a = -k; a <= k; ++a)
    for (long b = lo1; b <= hi1; ++b)
      for (long c = lo2; c <= hi2; ++c) {
        os << a;
        if (t.dim() >= 2) os << "," << b;
        if (t.dim() >= 3) os << "," << c;
        std::snprintf(buf, sizeof buf, ",%.12e\n", t.at(a, b, c) + 0.0);  // no "-0"
        os << buf;
      }
}

/// Thread-safe cache of weight tables keyed by the bit pattern of alpha and
/// the table geometry. Tables are immutable once inserted.
class WeightCache {
 public:
  using Ptr = std::shared_ptr<const WeightTable>;

  /// m == 0 requests the closed form (1D only). A cached table with a larger
  /// extent satisfies a smaller request.
  Ptr get(double alpha, int dim, std::size_t m, std::size_t extent) {
    std::uint64_t bits;
    std::memcpy(&bits, &alpha, sizeof bits);
    const Key key{bits, dim, m};
    {
      std::lock_guard lock(mutex_);
      if (auto it = tables_.find(key); it != tables_.end() && (it->second->extent() >= extent || it->second->complete())) {
        return it->second;
      }
    }
    Ptr table = m == 0 ? std::make_shared<const WeightTable>(weights_1d_closed_form(alpha, extent))
                       : std::make_shared<const WeightTable>(
                             weights_nd_fft(alpha, dim, m, QuadratureOptions{extent, 0, QuadratureRoute::even_cosine}));
    std::lock_guard lock(mutex_);
    auto& slot = tables_[key];
    if (!slot || slot->extent() < table->extent()) slot = std::move(table);
    return slot;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return tables_.size();
  }

  void clear() {
    std::lock_guard lock(mutex_);
    tables_.clear();
  }

  static std::shared_ptr<WeightCache> global() {
    static auto cache = std::make_shared<WeightCache>();
    return cache;
  }

 private:
  using Key = std::tuple<std::uint64_t, int, std::size_t>;
  mutable std::mutex mutex_;
  std::map<Key, Ptr> tables_;
};

}  // namespace fraclap
