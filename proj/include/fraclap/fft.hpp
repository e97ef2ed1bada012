#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <vector>

namespace fraclap::fft {

// FFTW's planner is not re-entrant; execution through the new-array
// interface is. All plan creation and destruction goes through this lock.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct Allocator {
  using value_type = T;
  Allocator() = default;
  template <class U>
  Allocator(const Allocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const Allocator<U>&) const noexcept { return true; }
};

template <class T>
using Buffer = std::vector<T, Allocator<T>>;

using Complex = std::complex<double>;

inline fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

/// Planner wrapper: runs `make` under the planner lock and takes ownership.
template <class MakeFn>
Plan make_plan(MakeFn&& make) {
  std::lock_guard lock(planner_mutex());
  fftw_plan p = make();
  if (!p) throw std::runtime_error("FFTW failed to create a plan");
  return Plan(p);
}

/// Sets the FFTW thread count for plans created afterwards.
inline void set_threads(int threads) {
  std::lock_guard lock(planner_mutex());
  static bool initialised = false;
  if (!initialised) {
    fftw_init_threads();
    initialised = true;
  }
  fftw_plan_with_nthreads(threads < 1 ? 1 : threads);
}

/// Smallest n >= target whose prime factors are all in {2, 3, 5, 7}.
inline std::size_t nice_size(std::size_t target) {
  if (target <= 1) return 1;
  for (std::size_t n = target;; ++n) {
    std::size_t m = n;
    for (std::size_t f : {2u, 3u, 5u, 7u}) {
      while (m % f == 0) m /= f;
    }
    if (m == 1) return n;
  }
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace fraclap::fft
