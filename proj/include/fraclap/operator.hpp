#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/fft.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/lowrank.hpp"
#include "fraclap/weights.hpp"

namespace fraclap {

enum class ApplyMode { direct, fast };

struct OperatorOptions {
  ApplyMode mode = ApplyMode::fast;
  int rank = default_rank;
  double rank_epsilon = 0.0;  // > 0 selects the rank with estimate_rank instead
  std::size_t quadrature = 0; // 0: closed form in 1D, default_quadrature otherwise
  std::shared_ptr<WeightCache> cache;  // null: the process-wide cache
};

namespace detail {

inline std::array<std::size_t, 3> embedding_sizes(const UniformGrid& g) {
  std::array<std::size_t, 3> l{1, 1, 1};
  for (int p = 0; p < g.dim; ++p) l[p] = fft::nice_size(2 * g.n[p]);
  return l;
}

inline std::size_t spectrum_size(const std::array<std::size_t, 3>& l, int dim) {
  std::size_t s = l[dim - 1] / 2 + 1;
  for (int p = 0; p < dim - 1; ++p) s *= l[p];
  return s;
}

inline std::array<int, 3> int_dims(const std::array<std::size_t, 3>& l) {
  return {static_cast<int>(l[0]), static_cast<int>(l[1]), static_cast<int>(l[2])};
}

// Flat offset of interior node idx inside the zero-padded embedding.
inline std::size_t embed_index(const std::array<std::size_t, 3>& idx, const std::array<std::size_t, 3>& l) {
  return (idx[0] * l[1] + idx[1]) * l[2] + idx[2];
}

}  // namespace detail

/// One constant-order operator h^{-alpha} T, with T the (block) Toeplitz
/// matrix a_{k-j}, embedded in a circulant of size nice_size(2N) per
/// dimension. The kernel is even, so its DFT is real and stored as such.
class ConstantOrderKernel {
 public:
  ConstantOrderKernel(const WeightTable& table, const UniformGrid& grid) : grid_(grid), alpha_(table.alpha()) {
    if (table.dim() != grid.dim) fail(Errc::grid_mismatch, "weight table dimension differs from the grid");
    const std::size_t need = grid.max_n() - 1;
    if (table.extent() < need && !table.complete()) {
      fail(Errc::missing_weights, "weight table does not reach offset " + std::to_string(need));
    }
    scale_ = std::pow(grid.step(), -alpha_);
    l_ = detail::embedding_sizes(grid);
    const std::size_t total = l_[0] * l_[1] * l_[2];
    fft::Buffer<double> kernel(total, 0.0);
    const auto& n = grid.n;
    // circulant column: offset k at position k, offset -k at position L-k
    auto positions = [&](int p, long k) {
      std::array<std::size_t, 2> pos{static_cast<std::size_t>(k), l_[p] - static_cast<std::size_t>(k)};
      return pos;
    };
    const long n0 = static_cast<long>(n[0]), n1 = static_cast<long>(grid.dim >= 2 ? n[1] : 1),
               n2 = static_cast<long>(grid.dim >= 3 ? n[2] : 1);
    for (long a = 0; a < n0; ++a)
      for (long b = 0; b < n1; ++b)
        for (long c = 0; c < n2; ++c) {
          const double w = table.at(a, b, c);
          const auto pa = positions(0, a);
          const auto pb = positions(1, b);
          const auto pc = positions(2, c);
          for (int sa = 0; sa < (a ? 2 : 1); ++sa)
            for (int sb = 0; sb < (b ? 2 : 1); ++sb)
              for (int sc = 0; sc < (c ? 2 : 1); ++sc) kernel[(pa[sa] * l_[1] + pb[sb]) * l_[2] + pc[sc]] = w;
        }
    const std::size_t ns = detail::spectrum_size(l_, grid.dim);
    fft::Buffer<fft::Complex> spec(ns);
    const auto dims = detail::int_dims(l_);
    auto plan = fft::make_plan([&] {
      return fftw_plan_dft_r2c(grid.dim, dims.data(), kernel.data(), fft::as_fftw(spec.data()), FFTW_ESTIMATE);
    });
    fftw_execute_dft_r2c(plan.get(), kernel.data(), fft::as_fftw(spec.data()));
    spectrum_.resize(ns);
    for (std::size_t i = 0; i < ns; ++i) spectrum_[i] = spec[i].real();
  }

  double alpha() const { return alpha_; }
  int dim() const { return grid_.dim; }
  double scale() const { return scale_; }
  const UniformGrid& grid() const { return grid_; }
  const std::array<std::size_t, 3>& embedding() const { return l_; }
  std::span<const double> spectrum() const { return spectrum_; }

 private:
  UniformGrid grid_;
  double alpha_;
  double scale_ = 1.0;
  std::array<std::size_t, 3> l_{1, 1, 1};
  std::vector<double> spectrum_;
};

/// Forward and inverse transforms of one embedding size, plus scratch.
class EmbeddingTransforms {
 public:
  explicit EmbeddingTransforms(const UniformGrid& grid) : grid_(grid), l_(detail::embedding_sizes(grid)) {
    total_ = l_[0] * l_[1] * l_[2];
    nspec_ = detail::spectrum_size(l_, grid.dim);
    fft::Buffer<double> real(total_);
    fft::Buffer<fft::Complex> cplx(nspec_);
    const auto dims = detail::int_dims(l_);
    forward_ = fft::make_plan([&] {
      return fftw_plan_dft_r2c(grid.dim, dims.data(), real.data(), fft::as_fftw(cplx.data()), FFTW_ESTIMATE);
    });
    inverse_ = fft::make_plan([&] {
      return fftw_plan_dft_c2r(grid.dim, dims.data(), fft::as_fftw(cplx.data()), real.data(), FFTW_ESTIMATE);
    });
  }

  struct Scratch {
    fft::Buffer<double> padded;
    fft::Buffer<fft::Complex> u_hat;
    fft::Buffer<fft::Complex> product;
  };

  Scratch scratch() const {
    return {fft::Buffer<double>(total_), fft::Buffer<fft::Complex>(nspec_), fft::Buffer<fft::Complex>(nspec_)};
  }

  /// Zero-pads u (with exterior nodes of an optional mask zeroed) and
  /// transforms it into s.u_hat.
  void load(std::span<const double> u, const DomainMask* mask, Scratch& s) const {
    std::fill(s.padded.begin(), s.padded.end(), 0.0);
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (mask && !(*mask)[j]) continue;
      s.padded[detail::embed_index(grid_.unravel(j), l_)] = u[j];
    }
    fftw_execute_dft_r2c(forward_.get(), s.padded.data(), fft::as_fftw(s.u_hat.data()));
  }

  /// s.padded <- unnormalized inverse transform of u_hat * spectrum.
  void convolve(std::span<const double> spectrum, Scratch& s) const {
    for (std::size_t i = 0; i < nspec_; ++i) s.product[i] = s.u_hat[i] * spectrum[i];
    fftw_execute_dft_c2r(inverse_.get(), fft::as_fftw(s.product.data()), s.padded.data());
  }

  double at(const Scratch& s, std::size_t node) const {
    return s.padded[detail::embed_index(grid_.unravel(node), l_)];
  }

  std::size_t total() const { return total_; }

 private:
  UniformGrid grid_;
  std::array<std::size_t, 3> l_;
  std::size_t total_ = 0, nspec_ = 0;
  fft::Plan forward_, inverse_;
};

/// v = h^{-alpha} T u for one constant order, by circulant embedding.
inline GridFunction apply_constant_order(const ConstantOrderKernel& kernel, const GridFunction& u) {
  if (!(u.grid == kernel.grid())) fail(Errc::size_mismatch, "grid function does not match the kernel grid");
  EmbeddingTransforms tr(kernel.grid());
  auto s = tr.scratch();
  tr.load(u.values, nullptr, s);
  tr.convolve(kernel.spectrum(), s);
  GridFunction v(u.grid);
  const double c = kernel.scale() / static_cast<double>(tr.total());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = c * tr.at(s, j);
  return v;
}

/// The discrete variable-order operator
///   v_j = h^{-alpha_j} sum_k a_{k-j}^{(alpha_j)} u_k
/// on the interior nodes of an isotropic grid, with optional domain mask.
class VariableOrderOperator {
 public:
  VariableOrderOperator(const UniformGrid& grid, const OrderField& field, OperatorOptions opts = {},
                        std::optional<DomainMask> mask = std::nullopt)
      : grid_(grid), opts_(std::move(opts)), mask_(std::move(mask)) {
    h_ = grid_.step();
    if (!opts_.cache) opts_.cache = WeightCache::global();
    order_ = field.is_sampled() && field.sampled.size() == grid_.size() ? field : sample_order(field, grid_);
    if (mask_ && !(mask_->grid == grid_)) fail(Errc::grid_mismatch, "mask grid differs from operator grid");
    extent_ = grid_.max_n() - 1;
    if (extent_ == 0) extent_ = 1;
    if (grid_.dim == 1 && opts_.quadrature == 0) {
      quadrature_ = 0;
    } else {
      quadrature_ = opts_.quadrature ? opts_.quadrature : default_quadrature(grid_.dim, grid_.max_n());
      if (quadrature_ < 2 * grid_.max_n()) {
        fail(Errc::quadrature_too_coarse, "M = " + std::to_string(quadrature_) + " below 2N");
      }
    }
    index_distinct_orders();
    if (opts_.mode == ApplyMode::fast) build_fast();
  }

  const UniformGrid& grid() const { return grid_; }
  const OrderField& order() const { return order_; }
  ApplyMode mode() const { return opts_.mode; }
  double step() const { return h_; }
  std::size_t quadrature() const { return quadrature_; }
  const DomainMask* mask() const { return mask_ ? &*mask_ : nullptr; }
  bool has_fast_plan() const { return transforms_ != nullptr; }
  const ChebyshevPlan& plan() const {
    if (!transforms_) fail(Errc::plan_missing, "operator was built without a fast plan");
    return plan_;
  }
  const RankCoefficients& coefficients() const { return coeffs_; }
  const std::vector<ConstantOrderKernel>& kernels() const { return kernels_; }
  std::size_t distinct_orders() const { return distinct_.size(); }

  void apply(std::span<const double> u, std::span<double> v) const {
    if (opts_.mode == ApplyMode::fast) {
      apply_fast(u, v);
    } else {
      apply_direct(u, v);
    }
  }

  GridFunction apply(const GridFunction& u) const {
    check_grid(u);
    GridFunction v(grid_);
    apply(u.values, v.values);
    return v;
  }

  /// Reference O(N^{2d}) evaluation with one weight table per distinct order.
  void apply_direct(std::span<const double> u, std::span<double> v) const {
    check_sizes(u, v);
    std::vector<WeightCache::Ptr> tables(distinct_.size());
    for (std::size_t i = 0; i < distinct_.size(); ++i) {
      tables[i] = opts_.cache->get(distinct_[i], grid_.dim, quadrature_, extent_);
    }
    std::vector<std::size_t> support;
    support.reserve(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      if (u[k] != 0.0 && (!mask_ || (*mask_)[k])) support.push_back(k);
    }
    std::vector<std::array<std::size_t, 3>> support_idx(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) support_idx[i] = grid_.unravel(support[i]);
    auto dist = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (mask_ && !(*mask_)[j]) {
        v[j] = 0.0;
        continue;
      }
      const auto jj = grid_.unravel(j);
      const WeightTable& t = *tables[node_order_[j]];
      double s = 0.0;
      for (std::size_t i = 0; i < support.size(); ++i) {
        const auto& kk = support_idx[i];
        s += t.at_offset(dist(kk[0], jj[0]), dist(kk[1], jj[1]), dist(kk[2], jj[2])) * u[support[i]];
      }
      v[j] = std::pow(h_, -order_.sampled[j]) * s;
    }
  }

  /// Rank-r fast evaluation: v = sum_q diag(c_q) h^{-alpha_q} T_q u.
  void apply_fast(std::span<const double> u, std::span<double> v) const {
    if (!transforms_) fail(Errc::plan_missing, "operator was built without a fast plan");
    check_sizes(u, v);
    auto s = transforms_->scratch();
    transforms_->load(u, mask(), s);
    std::fill(v.begin(), v.end(), 0.0);
    const double inv_total = 1.0 / static_cast<double>(transforms_->total());
    for (int q = 0; q < plan_.rank; ++q) {
      const auto& k = kernels_[q];
      transforms_->convolve(k.spectrum(), s);
      const double c = k.scale() * inv_total;
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += coeffs_(j, q) * c * transforms_->at(s, j);
    }
    if (mask_) mask_->apply(v);
  }

 private:
  void check_grid(const GridFunction& u) const {
    if (!(u.grid == grid_)) fail(Errc::grid_mismatch, "grid function lives on a different grid");
  }

  void check_sizes(std::span<const double> u, std::span<double> v) const {
    if (u.size() != grid_.size() || v.size() != grid_.size()) {
      fail(Errc::grid_mismatch, "vector length does not match the operator grid");
    }
  }

  void index_distinct_orders() {
    std::unordered_map<std::uint64_t, std::uint32_t> seen;
    node_order_.resize(grid_.size());
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      std::uint64_t bits;
      std::memcpy(&bits, &order_.sampled[j], sizeof bits);
      auto [it, inserted] = seen.emplace(bits, static_cast<std::uint32_t>(distinct_.size()));
      if (inserted) distinct_.push_back(order_.sampled[j]);
      node_order_[j] = it->second;
    }
  }

  void build_fast() {
    int r = opts_.rank;
    if (opts_.rank_epsilon > 0.0) {
      r = estimate_rank(order_.alpha_min, order_.alpha_max, h_, opts_.rank_epsilon, grid_.dim).rank;
    }
    plan_ = build_plan(order_.alpha_min, order_.alpha_max, r);
    coeffs_ = rank_coefficients(plan_, order_.sampled);
    kernels_.reserve(plan_.rank);
    for (double a : plan_.nodes) {
      const auto table = opts_.cache->get(a, grid_.dim, quadrature_, extent_);
      kernels_.emplace_back(*table, grid_);
    }
    transforms_ = std::make_shared<const EmbeddingTransforms>(grid_);
  }

  UniformGrid grid_;
  OperatorOptions opts_;
  std::optional<DomainMask> mask_;
  OrderField order_;
  double h_ = 1.0;
  std::size_t extent_ = 1;
  std::size_t quadrature_ = 0;
  std::vector<double> distinct_;
  std::vector<std::uint32_t> node_order_;
  ChebyshevPlan plan_;
  RankCoefficients coeffs_;
  std::vector<ConstantOrderKernel> kernels_;
  std::shared_ptr<const EmbeddingTransforms> transforms_;
};

inline GridFunction apply_direct(const VariableOrderOperator& op, const GridFunction& u) {
  if (!(u.grid == op.grid())) fail(Errc::grid_mismatch, "grid function lives on a different grid");
  GridFunction v(op.grid());
  op.apply_direct(u.values, v.values);
  return v;
}

inline GridFunction apply_fast(const VariableOrderOperator& op, const GridFunction& u) {
  if (!(u.grid == op.grid())) fail(Errc::grid_mismatch, "grid function lives on a different grid");
  GridFunction v(op.grid());
  op.apply_fast(u.values, v.values);
  return v;
}

struct TimingReport {
  int dim = 1;
  std::size_t n = 0;
  int rank = 1;
  int reps = 0;
  double seconds_per_apply = 0.0;
};

/// Best-of-n_reps wall clock of one fast apply on a fixed pseudo-random vector.
inline TimingReport operator_timing(const VariableOrderOperator& op, int n_reps) {
  if (!op.has_fast_plan()) fail(Errc::plan_missing, "timing needs a fast plan");
  std::vector<double> u(op.grid().size()), v(op.grid().size());
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (auto& x : u) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    x = static_cast<double>(state >> 11) * 0x1.0p-53;
  }
  op.apply_fast(u, v);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < std::max(1, n_reps); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    op.apply_fast(u, v);
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return {op.grid().dim, op.grid().max_n(), op.plan().rank, std::max(1, n_reps), best};
}

/// Least-squares slope of log(y) against log(x).
inline double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(Errc::size_mismatch, "slope fit needs two or more pairs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace fraclap
