#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>

#include "fdrelay/mimo_channel.hpp"
#include "fdrelay/types.hpp"

namespace fdrelay {

/// Shape of a canceller filter A(z): m_r x m_t taps, order L_A.
struct CancellerDims {
  std::size_t m_r = 0;
  std::size_t m_t = 0;
  std::size_t order = 0;

  std::size_t stacked_rows() const noexcept { return (order + 1) * m_t; }
  bool operator==(const CancellerDims&) const = default;
};

/// The feedback filter A(z) whose output z(n) = A(z) t~(n) is added to the
/// relay input.
class CancellerFilter {
 public:
  explicit CancellerFilter(FirMimoChannel taps) : taps_(std::move(taps)) {}

  const FirMimoChannel& taps() const noexcept { return taps_; }
  CancellerDims dims() const { return {taps_.rows(), taps_.cols(), taps_.order()}; }

 private:
  FirMimoChannel taps_;
};

/// No digital cancellation (natural isolation).
inline CancellerFilter make_ni(const CancellerDims& dims) {
  return CancellerFilter(FirMimoChannel::zero(dims.m_r, dims.m_t, dims.order));
}

/// Subtract the estimated loop channel: A(z) = -H~(z).
inline CancellerFilter make_tdc(const FirMimoChannel& estimate, const CancellerDims& expected) {
  if (estimate.rows() != expected.m_r || estimate.cols() != expected.m_t ||
      estimate.order() != expected.order)
    throw ConfigError("make_tdc: channel estimate does not match the canceller dimensions");
  return CancellerFilter(estimate.negated());
}

/// e = q + sum_l A[l] t~(n-l)
inline void cancel(const CancellerFilter& filter, const SignalHistory& t_history,
                   std::span<const cplx> q, std::span<cplx> e) {
  if (q.size() != filter.taps().rows() || e.size() != q.size())
    throw ConfigError("cancel: observation dimension does not match the filter");
  std::copy(q.begin(), q.end(), e.begin());
  apply_fir_accumulate(filter.taps(), t_history, e);
}

inline CVector cancel(const CancellerFilter& filter, const SignalHistory& t_history,
                      std::span<const cplx> q) {
  CVector e(q.size());
  cancel(filter, t_history, q, e);
  return e;
}

// ---------------------------------------------------------------------------
// Stacked (tap-concatenated) parameter layout
//
// The stacked matrix has (L+1)*m_t rows and m_r columns. Rows are tap-major:
// block l (rows l*m_t .. (l+1)*m_t-1) holds A[l]^H, so that
//   sum_l A[l] t~(n-l) = A_star^H t_bar(n)
// with t_bar(n) = [t~(n); t~(n-1); ...; t~(n-L)].
// ---------------------------------------------------------------------------

class StackedCoefficients {
 public:
  explicit StackedCoefficients(const CancellerDims& dims)
      : dims_(dims), matrix_(dims.stacked_rows(), dims.m_r) {}

  StackedCoefficients(const CancellerDims& dims, CMatrix matrix) : dims_(dims), matrix_(std::move(matrix)) {
    if (matrix_.rows() != dims.stacked_rows() || matrix_.cols() != dims.m_r)
      throw ConfigError("StackedCoefficients: matrix shape does not match dims");
  }

  static StackedCoefficients stack(const FirMimoChannel& channel) {
    const CancellerDims dims{channel.rows(), channel.cols(), channel.order()};
    StackedCoefficients out(dims);
    for (std::size_t l = 0; l <= dims.order; ++l)
      for (std::size_t r = 0; r < dims.m_r; ++r)
        for (std::size_t t = 0; t < dims.m_t; ++t)
          out.matrix_(l * dims.m_t + t, r) = std::conj(channel.tap(l)(r, t));
    return out;
  }

  FirMimoChannel unstack() const {
    std::vector<CMatrix> taps(dims_.order + 1, CMatrix(dims_.m_r, dims_.m_t));
    for (std::size_t l = 0; l <= dims_.order; ++l)
      for (std::size_t r = 0; r < dims_.m_r; ++r)
        for (std::size_t t = 0; t < dims_.m_t; ++t)
          taps[l](r, t) = std::conj(matrix_(l * dims_.m_t + t, r));
    return FirMimoChannel(std::move(taps));
  }

  const CancellerDims& dims() const noexcept { return dims_; }
  const CMatrix& matrix() const noexcept { return matrix_; }
  CMatrix& matrix() noexcept { return matrix_; }

 private:
  CancellerDims dims_;
  CMatrix matrix_;
};

/// t_bar(n) = vec[t~(n), ..., t~(n-order)], tap-major.
inline void build_regressor(const SignalHistory& t_history, std::size_t order, std::span<cplx> out) {
  const std::size_t m_t = t_history.dim();
  if (out.size() != (order + 1) * m_t) throw ConfigError("build_regressor: output length mismatch");
  if (t_history.capacity() < order + 1) throw ConfigError("build_regressor: history too short");
  for (std::size_t l = 0; l <= order; ++l) {
    const auto s = t_history.at(l);
    std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(l * m_t));
  }
}

inline CVector build_regressor(const SignalHistory& t_history, std::size_t order) {
  CVector out((order + 1) * t_history.dim());
  build_regressor(t_history, order, out);
  return out;
}

/// Normalized squared Frobenius distance ||estimate - truth||^2 / ||truth||^2.
inline double error_metric_linear(const StackedCoefficients& estimate, const StackedCoefficients& truth) {
  if (!(estimate.dims() == truth.dims())) throw ConfigError("error_metric: shapes differ");
  const double denom = truth.matrix().frobenius_norm_sq();
  if (!(denom > 0.0)) throw MetricError("error_metric: reference channel has zero norm");
  const auto a = estimate.matrix().data();
  const auto h = truth.matrix().data();
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += std::norm(a[i] - h[i]);
  return num / denom;
}

inline constexpr double kErrorMetricFloorDb = -300.0;

inline double to_db_floored(double linear) {
  if (!(linear > 0.0)) return kErrorMetricFloorDb;
  return std::max(10.0 * std::log10(linear), kErrorMetricFloorDb);
}

/// Error metric in dB, floored at -300 dB for an exact match.
inline double error_metric(const StackedCoefficients& estimate, const StackedCoefficients& truth) {
  return to_db_floored(error_metric_linear(estimate, truth));
}

// ---------------------------------------------------------------------------
// Recursive least squares
// ---------------------------------------------------------------------------

/// Bounds past which a realization is declared divergent.
inline constexpr double kMaxCoefficientMagnitude = 1e6;
inline constexpr double kMaxInverseCorrelationTrace = 1e12;

struct RlsState {
  StackedCoefficients a_star;
  CMatrix p_bar;  // inverse of the weighted regressor correlation
  double lambda = 1.0;
  double mu = 1.0;
  std::size_t iteration = 0;

  // Per-step workspace; innovation holds q(n) - A_star^H t_bar(n) from the last step.
  CVector gain;
  CVector p_t;
  CVector innovation;

  const CancellerDims& dims() const noexcept { return a_star.dims(); }
};

/// Zero coefficients and P_bar = initial_scale * I (the canonical start uses 1).
inline RlsState rls_init(const CancellerDims& dims, double lambda, double mu,
                         double initial_scale = 1.0) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("rls_init: lambda must lie in (0, 1]");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("rls_init: mu must be positive");
  if (!(initial_scale > 0.0) || !std::isfinite(initial_scale))
    throw ConfigError("rls_init: initial scale must be positive");
  if (dims.m_r == 0 || dims.m_t == 0) throw ConfigError("rls_init: empty dimensions");
  const std::size_t d = dims.stacked_rows();
  RlsState s{StackedCoefficients(dims), initial_scale * CMatrix::identity(d), lambda, mu, 0,
             CVector(d), CVector(d), CVector(dims.m_r)};
  return s;
}

/// One Woodbury-form update, O(d^2) with d = (L_A+1) m_t:
///   k      = P t_bar / (lambda + t_bar^H P t_bar)
///   A_star = A_star + mu k (q - A_star^H t_bar)^H
///   P      = (P - k t_bar^H P) / lambda, then Hermitian-symmetrized.
inline void rls_step(RlsState& s, std::span<const cplx> t_bar, std::span<const cplx> q) {
  const std::size_t d = s.p_bar.rows();
  const std::size_t m_r = s.a_star.dims().m_r;
  if (t_bar.size() != d) throw ConfigError("rls_step: regressor length mismatch");
  if (q.size() != m_r) throw ConfigError("rls_step: observation dimension mismatch");

  auto& p = s.p_bar;
  auto& a = s.a_star.matrix();

  double quad = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    cplx acc = 0.0;
    const cplx* row = p.data().data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * t_bar[j];
    s.p_t[i] = acc;
    quad += (std::conj(t_bar[i]) * acc).real();
  }
  const double denom = s.lambda + quad;
  for (std::size_t i = 0; i < d; ++i) s.gain[i] = s.p_t[i] / denom;

  for (std::size_t r = 0; r < m_r; ++r) {
    cplx acc = q[r];
    for (std::size_t i = 0; i < d; ++i) acc -= std::conj(a(i, r)) * t_bar[i];
    s.innovation[r] = acc;
  }
  for (std::size_t i = 0; i < d; ++i) {
    const cplx ki = s.mu * s.gain[i];
    for (std::size_t r = 0; r < m_r; ++r) a(i, r) += ki * std::conj(s.innovation[r]);
  }

  // t_bar^H P = (P t_bar)^H for Hermitian P.
  const double inv_lambda = 1.0 / s.lambda;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      p(i, j) = (p(i, j) - s.gain[i] * std::conj(s.p_t[j])) * inv_lambda;
  for (std::size_t i = 0; i < d; ++i) {
    p(i, i) = p(i, i).real();
    for (std::size_t j = i + 1; j < d; ++j) {
      const cplx avg = 0.5 * (p(i, j) + std::conj(p(j, i)));
      p(i, j) = avg;
      p(j, i) = std::conj(avg);
    }
  }

  ++s.iteration;

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += p(i, i).real();
  if (!std::isfinite(trace) || trace > kMaxInverseCorrelationTrace)
    throw DivergenceError("rls_step: inverse correlation matrix diverged", s.iteration);
  for (const auto& v : a.data())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || std::abs(v) > kMaxCoefficientMagnitude)
      throw DivergenceError("rls_step: filter coefficients diverged", s.iteration);
}

/// Canceller filter currently represented by an RLS state: A(z) = -A_hat(z).
inline CancellerFilter filter_from_rls(const RlsState& s) {
  return CancellerFilter(s.a_star.unstack().negated());
}

/// Loop-channel estimate implied by a canceller filter (its negation).
inline StackedCoefficients implied_estimate(const CancellerFilter& filter) {
  return StackedCoefficients::stack(filter.taps().negated());
}

// ---------------------------------------------------------------------------
// Runtime-selected canceller. It only ever sees the known baseband history
// t~ and the relay input q.
// ---------------------------------------------------------------------------

class Canceller {
 public:
  /// z(n) = 0. Holds no filter state at all.
  static Canceller passthrough() { return Canceller(std::monostate{}); }
  static Canceller fixed(CancellerFilter filter) { return Canceller(std::move(filter)); }
  static Canceller adaptive(RlsState state) { return Canceller(std::move(state)); }

  /// Produces e(n) and, for the adaptive variant, advances the RLS state using
  /// (t_bar(n), q(n)). e(n) uses the coefficients from before the update.
  void process(const SignalHistory& t_history, std::span<const cplx> q, std::span<cplx> e) {
    if (auto* f = std::get_if<CancellerFilter>(&impl_)) {
      cancel(*f, t_history, q, e);
    } else if (auto* s = std::get_if<RlsState>(&impl_)) {
      regressor_.resize(s->dims().stacked_rows());
      build_regressor(t_history, s->dims().order, regressor_);
      rls_step(*s, regressor_, q);
      std::copy(s->innovation.begin(), s->innovation.end(), e.begin());
    } else {
      std::copy(q.begin(), q.end(), e.begin());
    }
  }

  const RlsState* rls_state() const { return std::get_if<RlsState>(&impl_); }
  const CancellerFilter* filter() const { return std::get_if<CancellerFilter>(&impl_); }
  bool is_passthrough() const { return std::holds_alternative<std::monostate>(impl_); }

 private:
  template <typename T>
  explicit Canceller(T impl) : impl_(std::move(impl)) {}

  std::variant<std::monostate, CancellerFilter, RlsState> impl_;
  CVector regressor_;
};

}  // namespace fdrelay
