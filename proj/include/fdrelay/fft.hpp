#pragma once

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <span>

#include "fdrelay/types.hpp"

namespace fdrelay {

namespace detail {
// The FFTW planner is not thread-safe; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Unitary DFT of a fixed size (scale 1/sqrt(n) in both directions).
class UnitaryDft {
 public:
  explicit UnitaryDft(std::size_t n) : n_(n), scale_(1.0 / std::sqrt(static_cast<double>(n))) {
    if (n == 0) throw ConfigError("UnitaryDft: size must be >= 1");
    CVector in(n), out(n);
    std::lock_guard lock(detail::fftw_planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(in.data()), as_fftw(out.data()),
                                FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(in.data()), as_fftw(out.data()),
                                 FFTW_BACKWARD, flags);
  }

  ~UnitaryDft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  UnitaryDft(const UnitaryDft&) = delete;
  UnitaryDft& operator=(const UnitaryDft&) = delete;

  std::size_t size() const noexcept { return n_; }

  /// X[m] = n^-1/2 sum_k x[k] exp(-j 2 pi k m / n). in and out must not alias.
  void forward(std::span<const cplx> in, std::span<cplx> out) const { run(forward_, in, out); }

  /// x[k] = n^-1/2 sum_m X[m] exp(+j 2 pi k m / n). in and out must not alias.
  void inverse(std::span<const cplx> in, std::span<cplx> out) const { run(backward_, in, out); }

 private:
  static fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

  void run(fftw_plan plan, std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != n_ || out.size() != n_) throw InputError("UnitaryDft: length mismatch");
    // FFTW takes non-const input pointers but leaves out-of-place inputs untouched.
    fftw_execute_dft(plan, as_fftw(const_cast<cplx*>(in.data())), as_fftw(out.data()));
    for (auto& v : out) v *= scale_;
  }

  std::size_t n_;
  double scale_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace fdrelay
