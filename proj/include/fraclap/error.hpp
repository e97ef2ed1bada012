#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fraclap {

/// Failure categories raised by the library. Every throw site uses one of
/// these so callers (and the CLI exit-code mapping) can branch on the code
/// rather than on message text.
enum class Errc {
  invalid_box,
  invalid_dim,
  order_out_of_range,
  empty_domain,
  invalid_quadrature,
  quadrature_too_coarse,
  invalid_range,
  out_of_range,
  rank_cap_exceeded,
  grid_mismatch,
  missing_weights,
  plan_missing,
  size_mismatch,
  breakdown,
  max_iter_exceeded,
  nan_detected,
  pole_in_b,
  range_exceeded,
  tail_too_large,
  quadrature_nonconvergent,
  not_nested,
  config,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_box: return "InvalidBox";
    case Errc::invalid_dim: return "InvalidDim";
    case Errc::order_out_of_range: return "OrderOutOfRange";
    case Errc::empty_domain: return "EmptyDomain";
    case Errc::invalid_quadrature: return "InvalidQuadrature";
    case Errc::quadrature_too_coarse: return "QuadratureTooCoarse";
    case Errc::invalid_range: return "InvalidRange";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::rank_cap_exceeded: return "RankCapExceeded";
    case Errc::grid_mismatch: return "GridMismatch";
    case Errc::missing_weights: return "MissingWeights";
    case Errc::plan_missing: return "PlanMissing";
    case Errc::size_mismatch: return "SizeMismatch";
    case Errc::breakdown: return "Breakdown";
    case Errc::max_iter_exceeded: return "MaxIterExceeded";
    case Errc::nan_detected: return "NanDetected";
    case Errc::pole_in_b: return "PoleInB";
    case Errc::range_exceeded: return "RangeExceeded";
    case Errc::tail_too_large: return "TailTooLarge";
    case Errc::quadrature_nonconvergent: return "QuadratureNonConvergent";
    case Errc::not_nested: return "NotNested";
    case Errc::config: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace fraclap
