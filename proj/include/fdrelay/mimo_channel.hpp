#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "fdrelay/rng.hpp"
#include "fdrelay/types.hpp"

namespace fdrelay {

/// Tapped matrix filter H(z) = sum_k H[k] z^-k. Tap k maps the input sample
/// delayed by k onto the output; every tap is rows x cols. Immutable.
class FirMimoChannel {
 public:
  explicit FirMimoChannel(std::vector<CMatrix> taps) : taps_(std::move(taps)) {
    if (taps_.empty()) throw ConfigError("FirMimoChannel: at least one tap required");
    for (const auto& t : taps_) {
      if (t.rows() != taps_.front().rows() || t.cols() != taps_.front().cols())
        throw ConfigError("FirMimoChannel: taps must share dimensions");
      if (t.rows() == 0 || t.cols() == 0) throw ConfigError("FirMimoChannel: empty tap");
    }
  }

  static FirMimoChannel zero(std::size_t rows, std::size_t cols, std::size_t order) {
    return FirMimoChannel(std::vector<CMatrix>(order + 1, CMatrix(rows, cols)));
  }

  std::size_t rows() const noexcept { return taps_.front().rows(); }
  std::size_t cols() const noexcept { return taps_.front().cols(); }
  std::size_t order() const noexcept { return taps_.size() - 1; }
  std::size_t tap_count() const noexcept { return taps_.size(); }

  const CMatrix& tap(std::size_t k) const { return taps_.at(k); }
  const std::vector<CMatrix>& taps() const noexcept { return taps_; }

  double frobenius_norm_sq() const {
    double acc = 0.0;
    for (const auto& t : taps_) acc += t.frobenius_norm_sq();
    return acc;
  }

  FirMimoChannel negated() const {
    auto taps = taps_;
    for (auto& t : taps) t *= -1.0;
    return FirMimoChannel(std::move(taps));
  }

  /// DFT of the taps at subcarrier m of an n_sub-point grid:
  /// sum_k H[k] exp(-j 2 pi k m / n_sub).
  CMatrix frequency_response(std::size_t m, std::size_t n_sub) const {
    CMatrix out(rows(), cols());
    for (std::size_t k = 0; k < taps_.size(); ++k) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * m) % n_sub) /
                           static_cast<double>(n_sub);
      out += std::polar(1.0, phase) * taps_[k];
    }
    return out;
  }

  bool operator==(const FirMimoChannel&) const = default;

 private:
  std::vector<CMatrix> taps_;
};

/// Fixed-capacity ring of vector samples, newest first. at(k) is x(n-k);
/// anything older than what has been pushed reads as zero (cold start).
class SignalHistory {
 public:
  SignalHistory(std::size_t dim, std::size_t capacity)
      : dim_(dim), capacity_(capacity), buffer_(dim * capacity), zeros_(dim) {
    if (dim == 0 || capacity == 0) throw ConfigError("SignalHistory: dim and capacity must be >= 1");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return fill_; }

  void push(std::span<const cplx> sample) {
    if (sample.size() != dim_) throw ConfigError("SignalHistory: sample dimension mismatch");
    head_ = (head_ + capacity_ - 1) % capacity_;
    std::copy(sample.begin(), sample.end(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    fill_ = std::min(fill_ + 1, capacity_);
  }

  std::span<const cplx> at(std::size_t delay) const {
    if (delay >= fill_) return zeros_;
    const std::size_t slot = (head_ + delay) % capacity_;
    return {buffer_.data() + slot * dim_, dim_};
  }

  void clear() {
    std::fill(buffer_.begin(), buffer_.end(), cplx{});
    head_ = 0;
    fill_ = 0;
  }

 private:
  std::size_t dim_;
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::size_t fill_ = 0;
  std::vector<cplx> buffer_;
  std::vector<cplx> zeros_;
};

/// out += sum_k H[k] x(n-k)
inline void apply_fir_accumulate(const FirMimoChannel& channel, const SignalHistory& history,
                                 std::span<cplx> out) {
  if (history.dim() != channel.cols())
    throw ConfigError("apply_fir: history dimension does not match channel input dimension");
  if (history.capacity() < channel.tap_count())
    throw ConfigError("apply_fir: history capacity below channel order + 1");
  if (out.size() != channel.rows()) throw ConfigError("apply_fir: output dimension mismatch");
  const std::size_t used = std::min(channel.tap_count(), history.size());
  for (std::size_t k = 0; k < used; ++k) accumulate_product(channel.tap(k), history.at(k), out);
}

inline CVector apply_fir(const FirMimoChannel& channel, const SignalHistory& history) {
  CVector out(channel.rows());
  apply_fir_accumulate(channel, history, out);
  return out;
}

/// Every tap entry i.i.d. CN(0, tap_variance). Draw order is tap-major then
/// row-major, so scaling tap_variance scales the same realization.
inline FirMimoChannel draw_rayleigh_channel(std::size_t rows, std::size_t cols, std::size_t order,
                                            double tap_variance, RngStream& rng) {
  if (rows == 0 || cols == 0) throw ConfigError("draw_rayleigh_channel: rows and cols must be >= 1");
  if (!(tap_variance >= 0.0) || !std::isfinite(tap_variance))
    throw ConfigError("draw_rayleigh_channel: tap variance must be finite and non-negative");
  std::vector<CMatrix> taps(order + 1, CMatrix(rows, cols));
  for (auto& t : taps)
    for (auto& v : t.data()) v = rng.complex_gaussian(tap_variance);
  return FirMimoChannel(std::move(taps));
}

/// Imperfect estimate H~ with H = H~ + E, E i.i.d. CN(0, error_variance),
/// drawn once for the whole realization.
inline FirMimoChannel perturb_channel(const FirMimoChannel& true_channel, double error_variance,
                                      RngStream& rng) {
  if (!(error_variance >= 0.0) || !std::isfinite(error_variance))
    throw ConfigError("perturb_channel: error variance must be finite and non-negative");
  auto taps = true_channel.taps();
  for (auto& t : taps)
    for (auto& v : t.data()) v -= rng.complex_gaussian(error_variance);
  return FirMimoChannel(std::move(taps));
}

inline void awgn_into(std::span<cplx> out, double variance, RngStream& rng) {
  for (auto& v : out) v = rng.complex_gaussian(variance);
}

inline CVector awgn(std::size_t dim, double variance, RngStream& rng) {
  if (dim == 0) throw ConfigError("awgn: dim must be >= 1");
  if (!(variance >= 0.0)) throw ConfigError("awgn: variance must be non-negative");
  CVector out(dim);
  awgn_into(out, variance, rng);
  return out;
}

}  // namespace fdrelay
