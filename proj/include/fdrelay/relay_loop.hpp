#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "fdrelay/mimo_channel.hpp"
#include "fdrelay/ofdm_phy.hpp"
#include "fdrelay/rng.hpp"
#include "fdrelay/si_canceller.hpp"

namespace fdrelay {

enum class Scheme { no_si, ni, tdc, rls };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::no_si: return "no-si";
    case Scheme::ni: return "ni";
    case Scheme::tdc: return "tdc";
    case Scheme::rls: return "rls";
  }
  return "unknown";
}

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "no-si") return Scheme::no_si;
  if (s == "ni") return Scheme::ni;
  if (s == "tdc") return Scheme::tdc;
  if (s == "rls") return Scheme::rls;
  return std::nullopt;
}

/// Channels and impairments of one full-duplex relay realization.
struct RelayScenario {
  FirMimoChannel h_sr;           // M_R x N_S
  FirMimoChannel h_li;           // M_R x M_T
  FirMimoChannel h_li_estimate;  // what TDC believes h_li to be
  ImpairmentModel impairment;
  double noise_variance = 0.0;
  double relay_mean_power = 1.0;  // E{t~^H t~}, the scale of the impairment noise
  std::size_t processing_delay = 1;

  std::size_t m_r() const { return h_sr.rows(); }
  std::size_t n_s() const { return h_sr.cols(); }
  std::size_t m_t() const { return h_li.cols(); }

  void validate() const {
    if (h_li.rows() != h_sr.rows()) throw ConfigError("RelayScenario: h_sr and h_li receive dimensions differ");
    if (h_li_estimate.rows() != h_li.rows() || h_li_estimate.cols() != h_li.cols() ||
        h_li_estimate.order() != h_li.order())
      throw ConfigError("RelayScenario: h_li_estimate shape differs from h_li");
    if (!(noise_variance >= 0.0)) throw ConfigError("RelayScenario: noise variance must be non-negative");
    if (!(relay_mean_power >= 0.0)) throw ConfigError("RelayScenario: relay power must be non-negative");
    if (processing_delay < 1) throw ConfigError("RelayScenario: processing delay must be >= 1 sample");
  }
};

/// One relay input sample with its parts kept apart:
///   q = signal + f + noise, signal = H_SR(z) x, f = H_LI(z) t,
/// and e = q + z(n) once a canceller has run.
struct LoopSample {
  CVector q;
  CVector e;
  CVector f;
  CVector signal;
  CVector noise;

  explicit LoopSample(std::size_t m_r = 0) : q(m_r), e(m_r), f(m_r), signal(m_r), noise(m_r) {}
};

/// The physical side of the relay: source channel, loopback channel fed with
/// the impaired transmit signal, and receiver noise.
class RelayFrontEnd {
 public:
  /// `canceller_order` sizes the known-signal history so a canceller of
  /// order L_A can read t~(n) .. t~(n - L_A).
  RelayFrontEnd(RelayScenario scenario, std::size_t canceller_order)
      : scenario_(std::move(scenario)),
        source_history_(scenario_.n_s(), scenario_.h_sr.tap_count()),
        known_history_(scenario_.m_t(), std::max(scenario_.h_li.tap_count(), canceller_order + 1)),
        transmit_history_(scenario_.m_t(), scenario_.h_li.tap_count()),
        impaired_(scenario_.m_t()) {
    scenario_.validate();
  }

  /// Pushes x(n) and t~(n), draws n_R(n) and E_t(n), and fills the physical
  /// components of `out` (q, f, signal, noise).
  void propagate(std::span<const cplx> x, std::span<const cplx> t_known, RngStream& noise_rng,
                 RngStream& impairment_rng, LoopSample& out) {
    source_history_.push(x);
    known_history_.push(t_known);
    impair_into(t_known, scenario_.impairment, scenario_.relay_mean_power, impairment_rng, impaired_);
    transmit_history_.push(impaired_);

    std::fill(out.signal.begin(), out.signal.end(), cplx{});
    std::fill(out.f.begin(), out.f.end(), cplx{});
    apply_fir_accumulate(scenario_.h_sr, source_history_, out.signal);
    apply_fir_accumulate(scenario_.h_li, transmit_history_, out.f);
    awgn_into(out.noise, scenario_.noise_variance, noise_rng);
    for (std::size_t r = 0; r < out.q.size(); ++r) out.q[r] = out.signal[r] + out.f[r] + out.noise[r];
  }

  /// History of the known baseband transmit signal t~; the only transmit-side
  /// information a canceller may use.
  const SignalHistory& known_transmit_history() const noexcept { return known_history_; }

  const RelayScenario& scenario() const noexcept { return scenario_; }

 private:
  RelayScenario scenario_;
  SignalHistory source_history_;
  SignalHistory known_history_;
  SignalHistory transmit_history_;
  CVector impaired_;
};

struct LoopRngs {
  RngStream noise;
  RngStream impairment;
};

/// One sample of the full-duplex loop: physical propagation, then
/// cancellation (and one RLS update when the canceller is adaptive).
inline void loop_tick(RelayFrontEnd& front_end, Canceller& canceller, std::span<const cplx> x,
                      std::span<const cplx> t_known, LoopRngs& rngs, LoopSample& out) {
  front_end.propagate(x, t_known, rngs.noise, rngs.impairment, out);
  canceller.process(front_end.known_transmit_history(), out.q, out.e);
}

// ---------------------------------------------------------------------------
// Transmit-side OFDM streams
// ---------------------------------------------------------------------------

/// 16-QAM OFDM symbol source for several parallel streams. Each stream has
/// power total_power / streams.
class OfdmSource {
 public:
  OfdmSource(std::size_t streams, std::size_t n_sub, std::size_t n_cp, double total_power)
      : modem_(n_sub, n_cp),
        amplitude_(std::sqrt(total_power / static_cast<double>(streams))),
        bits_(streams, std::vector<std::uint8_t>(4 * n_sub)),
        frame_{std::vector<CVector>(streams, CVector(n_sub)),
               std::vector<CVector>(streams, CVector(n_sub + n_cp)), n_sub, n_cp} {
    if (streams == 0) throw ConfigError("OfdmSource: at least one stream required");
  }

  /// Draws fresh bits for every stream and modulates them.
  const OfdmFrame& next(RngStream& bits_rng) {
    for (std::size_t s = 0; s < bits_.size(); ++s) {
      auto& b = bits_[s];
      for (std::size_t i = 0; i < b.size(); i += 64) {
        std::uint64_t word = bits_rng.next_u64();
        for (std::size_t k = i; k < std::min(i + 64, b.size()); ++k, word >>= 1)
          b[k] = static_cast<std::uint8_t>(word & 1u);
      }
      qam16_map(b, frame_.freq_grid[s]);
      for (auto& v : frame_.freq_grid[s]) v *= amplitude_;
      modem_.modulate(frame_.freq_grid[s], frame_.time_samples[s]);
    }
    return frame_;
  }

  const std::vector<std::vector<std::uint8_t>>& bits() const noexcept { return bits_; }
  const OfdmFrame& frame() const noexcept { return frame_; }
  double stream_amplitude() const noexcept { return amplitude_; }
  std::size_t streams() const noexcept { return bits_.size(); }

 private:
  OfdmModem modem_;
  double amplitude_;
  std::vector<std::vector<std::uint8_t>> bits_;
  OfdmFrame frame_;
};

/// An independent unit-power 16-QAM OFDM symbol on m_t antennas (1/m_t each).
inline OfdmFrame generate_relay_transmit(RngStream& rng, std::size_t m_t, std::size_t n_sub,
                                         std::size_t n_cp) {
  OfdmSource source(m_t, n_sub, n_cp, 1.0);
  return source.next(rng);
}

// ---------------------------------------------------------------------------
// Detection at the relay
// ---------------------------------------------------------------------------

/// OFDM demodulation + per-subcarrier ZF + hard 16-QAM decisions with the
/// exact source channel response. `stream_amplitude` is the per-stream
/// scaling the source applied to its unit-energy symbols.
class RelayDetector {
 public:
  RelayDetector(const FirMimoChannel& h_sr, std::size_t n_sub, std::size_t n_cp, double stream_amplitude)
      : modem_(n_sub, n_cp),
        equalizer_(effective_response(h_sr, n_sub, n_cp, stream_amplitude)),
        grids_(h_sr.rows(), CVector(n_sub)),
        symbols_(h_sr.cols(), CVector(n_sub)),
        bits_(h_sr.cols(), std::vector<std::uint8_t>(4 * n_sub)),
        received_(h_sr.rows()),
        estimate_(h_sr.cols()) {}

  std::size_t failed_subcarriers() const noexcept { return equalizer_.failed_subcarriers(); }

  /// e_frame[a] holds the n_cp + n_sub samples of receive antenna a.
  const std::vector<std::vector<std::uint8_t>>& detect(const std::vector<CVector>& e_frame) {
    if (e_frame.size() != grids_.size()) throw InputError("detect_at_relay: antenna count mismatch");
    for (std::size_t a = 0; a < grids_.size(); ++a) modem_.demodulate(e_frame[a], grids_[a]);
    for (std::size_t m = 0; m < modem_.n_sub(); ++m) {
      for (std::size_t a = 0; a < grids_.size(); ++a) received_[a] = grids_[a][m];
      equalizer_.apply(m, received_, estimate_);
      for (std::size_t s = 0; s < symbols_.size(); ++s) symbols_[s][m] = estimate_[s];
    }
    for (std::size_t s = 0; s < symbols_.size(); ++s) qam16_demap(symbols_[s], bits_[s]);
    return bits_;
  }

 private:
  static std::vector<CMatrix> effective_response(const FirMimoChannel& h_sr, std::size_t n_sub,
                                                 std::size_t n_cp, double amplitude) {
    if (h_sr.order() > n_cp)
      throw ConfigError("detect_at_relay: source channel order exceeds the cyclic prefix");
    std::vector<CMatrix> response;
    response.reserve(n_sub);
    for (std::size_t m = 0; m < n_sub; ++m) response.push_back(amplitude * h_sr.frequency_response(m, n_sub));
    return response;
  }

  OfdmModem modem_;
  ZfEqualizer equalizer_;
  std::vector<CVector> grids_;
  std::vector<CVector> symbols_;
  std::vector<std::vector<std::uint8_t>> bits_;
  CVector received_;
  CVector estimate_;
};

struct DetectionResult {
  std::vector<std::vector<std::uint8_t>> bits;  // per source stream
  std::size_t failed_subcarriers = 0;
};

inline DetectionResult detect_at_relay(const std::vector<CVector>& e_frame, const FirMimoChannel& h_sr,
                                       std::size_t n_cp, double stream_amplitude) {
  if (e_frame.empty() || e_frame.front().size() <= n_cp)
    throw InputError("detect_at_relay: frame shorter than the cyclic prefix");
  RelayDetector detector(h_sr, e_frame.front().size() - n_cp, n_cp, stream_amplitude);
  DetectionResult out;
  out.bits = detector.detect(e_frame);
  out.failed_subcarriers = detector.failed_subcarriers();
  return out;
}

}  // namespace fdrelay
