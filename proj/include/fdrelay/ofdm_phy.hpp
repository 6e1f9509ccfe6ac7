#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fdrelay/fft.hpp"
#include "fdrelay/rng.hpp"
#include "fdrelay/types.hpp"

namespace fdrelay {

// ---------------------------------------------------------------------------
// 16-QAM, Gray mapped, unit average energy.
//
// Bits b0 b1 select the in-phase level and b2 b3 the quadrature level:
//   00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3, all scaled by 1/sqrt(10).
// ---------------------------------------------------------------------------

inline const double kQam16Scale = 1.0 / std::sqrt(10.0);

namespace detail {
constexpr std::array<double, 4> kQam16Level = {-3.0, -1.0, +3.0, +1.0};  // indexed by 2-bit label

// Ties go to the smaller 2-bit label: -2 -> 00, 0 -> 01, +2 -> 10.
inline std::uint8_t qam16_slice(double y) {
  const double edge = 2.0 * kQam16Scale;
  if (y <= -edge) return 0b00;
  if (y <= 0.0) return 0b01;
  if (y < edge) return 0b11;
  return 0b10;
}
}  // namespace detail

inline cplx qam16_point(std::uint8_t label) {
  return {detail::kQam16Level[(label >> 2) & 3u] * kQam16Scale,
          detail::kQam16Level[label & 3u] * kQam16Scale};
}

inline void qam16_map(std::span<const std::uint8_t> bits, std::span<cplx> out) {
  if (bits.size() % 4 != 0) throw InputError("qam16_map: bit count must be a multiple of 4");
  if (out.size() != bits.size() / 4) throw InputError("qam16_map: output length mismatch");
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto* b = bits.data() + 4 * s;
    const auto label = static_cast<std::uint8_t>(((b[0] & 1u) << 3) | ((b[1] & 1u) << 2) |
                                                 ((b[2] & 1u) << 1) | (b[3] & 1u));
    out[s] = qam16_point(label);
  }
}

inline CVector qam16_map(std::span<const std::uint8_t> bits) {
  if (bits.size() % 4 != 0) throw InputError("qam16_map: bit count must be a multiple of 4");
  CVector out(bits.size() / 4);
  qam16_map(bits, out);
  return out;
}

inline void qam16_demap(std::span<const cplx> symbols, std::span<std::uint8_t> bits) {
  if (bits.size() != 4 * symbols.size()) throw InputError("qam16_demap: output length mismatch");
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const auto i = detail::qam16_slice(symbols[s].real());
    const auto q = detail::qam16_slice(symbols[s].imag());
    auto* b = bits.data() + 4 * s;
    b[0] = (i >> 1) & 1u;
    b[1] = i & 1u;
    b[2] = (q >> 1) & 1u;
    b[3] = q & 1u;
  }
}

inline std::vector<std::uint8_t> qam16_demap(std::span<const cplx> symbols) {
  std::vector<std::uint8_t> bits(4 * symbols.size());
  qam16_demap(symbols, bits);
  return bits;
}

// ---------------------------------------------------------------------------
// OFDM with cyclic prefix
// ---------------------------------------------------------------------------

/// One OFDM symbol for every stream. time_samples[s] = CP + unitary IDFT body.
struct OfdmFrame {
  std::vector<CVector> freq_grid;
  std::vector<CVector> time_samples;
  std::size_t n_sub = 0;
  std::size_t n_cp = 0;

  std::size_t streams() const noexcept { return freq_grid.size(); }
  std::size_t symbol_length() const noexcept { return n_cp + n_sub; }
};

/// Single-stream modulator/demodulator for a fixed (n_sub, n_cp). Holds FFT
/// plans; one instance per thread.
class OfdmModem {
 public:
  OfdmModem(std::size_t n_sub, std::size_t n_cp) : dft_(n_sub), n_cp_(n_cp) {}

  std::size_t n_sub() const noexcept { return dft_.size(); }
  std::size_t n_cp() const noexcept { return n_cp_; }
  std::size_t symbol_length() const noexcept { return n_cp_ + dft_.size(); }

  void modulate(std::span<const cplx> grid, std::span<cplx> out) const {
    if (out.size() != symbol_length()) throw InputError("ofdm_modulate: output length mismatch");
    if (n_cp_ > n_sub()) throw ConfigError("ofdm_modulate: cyclic prefix longer than symbol body");
    dft_.inverse(grid, out.subspan(n_cp_));
    std::copy(out.end() - static_cast<std::ptrdiff_t>(n_cp_), out.end(), out.begin());
  }

  void demodulate(std::span<const cplx> samples, std::span<cplx> out) const {
    if (samples.size() != symbol_length())
      throw InputError("ofdm_demodulate: expected n_cp + n_sub samples");
    dft_.forward(samples.subspan(n_cp_), out);
  }

 private:
  UnitaryDft dft_;
  std::size_t n_cp_;
};

inline OfdmFrame ofdm_modulate(std::vector<CVector> freq_grid, std::size_t n_cp) {
  if (freq_grid.empty()) throw InputError("ofdm_modulate: no streams");
  const std::size_t n_sub = freq_grid.front().size();
  for (const auto& g : freq_grid)
    if (g.size() != n_sub) throw InputError("ofdm_modulate: streams differ in subcarrier count");
  const OfdmModem modem(n_sub, n_cp);
  OfdmFrame frame{std::move(freq_grid), {}, n_sub, n_cp};
  for (const auto& g : frame.freq_grid) {
    CVector t(modem.symbol_length());
    modem.modulate(g, t);
    frame.time_samples.push_back(std::move(t));
  }
  return frame;
}

inline std::vector<CVector> ofdm_demodulate(const std::vector<CVector>& time_samples,
                                            std::size_t n_cp) {
  if (time_samples.empty()) throw InputError("ofdm_demodulate: no streams");
  const std::size_t total = time_samples.front().size();
  if (total <= n_cp) throw InputError("ofdm_demodulate: no samples after the cyclic prefix");
  const OfdmModem modem(total - n_cp, n_cp);
  std::vector<CVector> grids;
  for (const auto& t : time_samples) {
    CVector g(modem.n_sub());
    modem.demodulate(t, g);
    grids.push_back(std::move(g));
  }
  return grids;
}

// ---------------------------------------------------------------------------
// Zero-forcing detection
// ---------------------------------------------------------------------------

/// Per-subcarrier left pseudo-inverses (H^H H)^-1 H^H. Subcarriers whose
/// response lacks full column rank are flagged and equalize to zero.
class ZfEqualizer {
 public:
  explicit ZfEqualizer(const std::vector<CMatrix>& response) {
    filters_.reserve(response.size());
    for (const auto& h : response) {
      if (h.rows() < h.cols()) {
        filters_.emplace_back();
        ++failed_;
        continue;
      }
      const CMatrix hh = h.adjoint();
      try {
        filters_.emplace_back(solve(hh * h, hh));
      } catch (const RankDeficiencyError&) {
        filters_.emplace_back();
        ++failed_;
      }
    }
    if (!response.empty()) {
      rx_dim_ = response.front().rows();
      stream_dim_ = response.front().cols();
    }
  }

  std::size_t subcarriers() const noexcept { return filters_.size(); }
  std::size_t failed_subcarriers() const noexcept { return failed_; }
  bool failed(std::size_t m) const { return !filters_.at(m).has_value(); }

  void apply(std::size_t m, std::span<const cplx> received, std::span<cplx> estimate) const {
    if (received.size() != rx_dim_ || estimate.size() != stream_dim_)
      throw ConfigError("zf_detect: dimension mismatch");
    const auto& w = filters_[m];
    if (!w) {
      std::fill(estimate.begin(), estimate.end(), cplx{});
      return;
    }
    std::fill(estimate.begin(), estimate.end(), cplx{});
    accumulate_product(*w, received, estimate);
  }

 private:
  std::vector<std::optional<CMatrix>> filters_;
  std::size_t failed_ = 0;
  std::size_t rx_dim_ = 0;
  std::size_t stream_dim_ = 0;
};

struct ZfResult {
  std::vector<CVector> estimates;  // per subcarrier, N_S entries
  std::size_t failed_subcarriers = 0;
};

inline ZfResult zf_detect(const std::vector<CVector>& received_grid,
                          const std::vector<CMatrix>& channel_response) {
  if (received_grid.size() != channel_response.size())
    throw InputError("zf_detect: subcarrier counts differ");
  const ZfEqualizer eq(channel_response);
  ZfResult result;
  result.failed_subcarriers = eq.failed_subcarriers();
  for (std::size_t m = 0; m < received_grid.size(); ++m) {
    CVector x(channel_response[m].cols());
    eq.apply(m, received_grid[m], x);
    result.estimates.push_back(std::move(x));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Transmit impairments
// ---------------------------------------------------------------------------

/// Lumped DAC/PA/quantization error: additive CN(0, delta * E{t~^H t~}) per
/// transmit antenna.
struct ImpairmentModel {
  double delta = 0.0;

  explicit ImpairmentModel(double delta_ratio = 0.0) : delta(delta_ratio) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("ImpairmentModel: delta must be >= 0");
  }
};

inline void impair_into(std::span<const cplx> transmit, const ImpairmentModel& model,
                        double mean_power, RngStream& rng, std::span<cplx> out) {
  const double variance = model.delta * mean_power;
  for (std::size_t i = 0; i < transmit.size(); ++i)
    out[i] = transmit[i] + rng.complex_gaussian(variance);
}

inline CVector impair(std::span<const cplx> transmit, const ImpairmentModel& model,
                      double mean_power, RngStream& rng) {
  if (!(mean_power >= 0.0)) throw ConfigError("impair: mean power must be non-negative");
  CVector out(transmit.size());
  impair_into(transmit, model, mean_power, rng, out);
  return out;
}

}  // namespace fdrelay
