#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fdrelay/config.hpp"
#include "fdrelay/metrics.hpp"
#include "fdrelay/relay_loop.hpp"

namespace fdrelay {

/// Loop channel padded with zero taps up to `order`, so it can be compared
/// with a canceller of a higher order.
inline FirMimoChannel pad_to_order(const FirMimoChannel& channel, std::size_t order) {
  if (order < channel.order()) throw ConfigError("pad_to_order: target order below channel order");
  auto taps = channel.taps();
  taps.resize(order + 1, CMatrix(channel.rows(), channel.cols()));
  return FirMimoChannel(std::move(taps));
}

/// Channels of one realization. Draws come from the `channels` and
/// `estimation` streams only, so they do not depend on which schemes run, and
/// the same realization index at a different sigma2_li is the same draw rescaled.
inline RelayScenario draw_scenario(const SimConfig& cfg, double sigma2_li_db, std::uint64_t realization) {
  const double sigma2_li = db_to_linear(sigma2_li_db);
  auto channel_rng = seed_for(cfg.master_seed, realization, StreamRole::channels);
  auto h_sr = draw_rayleigh_channel(cfg.m_r, cfg.n_s, cfg.l_sr, 1.0, channel_rng);
  auto h_li = draw_rayleigh_channel(cfg.m_r, cfg.m_t, cfg.l_li, sigma2_li, channel_rng);
  auto estimation_rng = seed_for(cfg.master_seed, realization, StreamRole::estimation);
  auto h_li_estimate = perturb_channel(h_li, cfg.alpha * sigma2_li, estimation_rng);
  RelayScenario scenario{std::move(h_sr),
                         std::move(h_li),
                         std::move(h_li_estimate),
                         ImpairmentModel(cfg.delta),
                         cfg.noise_variance(),
                         cfg.relay_power,
                         cfg.symbol_length()};
  scenario.validate();
  return scenario;
}

/// Source, relay transmitter and front end of one realization, stepped one
/// OFDM symbol at a time. Source and relay symbols are sample-aligned.
class RealizationDriver {
 public:
  RealizationDriver(const SimConfig& cfg, RelayScenario scenario, std::uint64_t realization)
      : front_end_(std::move(scenario), cfg.l_a),
        source_(cfg.n_s, cfg.n_sub, cfg.n_cp, cfg.source_power),
        relay_(cfg.m_t, cfg.n_sub, cfg.n_cp, cfg.relay_power),
        source_bits_rng_(seed_for(cfg.master_seed, realization, StreamRole::source_bits)),
        relay_bits_rng_(seed_for(cfg.master_seed, realization, StreamRole::relay_bits)),
        rngs_{seed_for(cfg.master_seed, realization, StreamRole::noise),
              seed_for(cfg.master_seed, realization, StreamRole::impairment)},
        x_(cfg.n_s),
        t_known_(cfg.m_t),
        sample_(cfg.m_r) {}

  void next_symbol() {
    source_.next(source_bits_rng_);
    relay_.next(relay_bits_rng_);
  }

  /// Propagates sample i of the current symbol through the physical loop.
  const LoopSample& propagate(std::size_t i) {
    const auto& xs = source_.frame().time_samples;
    const auto& ts = relay_.frame().time_samples;
    for (std::size_t s = 0; s < x_.size(); ++s) x_[s] = xs[s][i];
    for (std::size_t a = 0; a < t_known_.size(); ++a) t_known_[a] = ts[a][i];
    front_end_.propagate(x_, t_known_, rngs_.noise, rngs_.impairment, sample_);
    return sample_;
  }

  std::span<const cplx> current_source_sample() const { return x_; }
  RelayFrontEnd& front_end() { return front_end_; }
  const OfdmSource& source() const { return source_; }
  LoopSample& sample() { return sample_; }

 private:
  RelayFrontEnd front_end_;
  OfdmSource source_;
  OfdmSource relay_;
  RngStream source_bits_rng_;
  RngStream relay_bits_rng_;
  LoopRngs rngs_;
  CVector x_;
  CVector t_known_;
  LoopSample sample_;
};

// ---------------------------------------------------------------------------
// Convergence of the adaptive canceller
// ---------------------------------------------------------------------------

struct ConvergenceRun {
  std::optional<std::size_t> convergence_sample;
  double em_final_db = 0.0;
  std::size_t iterations = 0;
};

/// Runs the RLS canceller for cfg.convergence_symbols OFDM symbols (or
/// `max_iterations` samples if given) on a fresh realization. When `trace`
/// is non-null it receives the linear error metric after every iteration.
inline ConvergenceRun simulate_convergence(const SimConfig& cfg, std::uint64_t realization,
                                           std::vector<double>* trace = nullptr,
                                           std::optional<std::size_t> max_iterations = std::nullopt) {
  const double sigma2_li_db = cfg.sigma2_li_db.front();
  RealizationDriver driver(cfg, draw_scenario(cfg, sigma2_li_db, realization), realization);
  const auto truth = StackedCoefficients::stack(pad_to_order(driver.front_end().scenario().h_li, cfg.l_a));
  auto canceller = Canceller::adaptive(rls_init({cfg.m_r, cfg.m_t, cfg.l_a}, cfg.lambda, cfg.mu));
  const double threshold = db_to_linear(cfg.em_threshold_db);
  const std::size_t total = max_iterations.value_or(cfg.convergence_symbols * cfg.symbol_length());

  ConvergenceRun run;
  if (trace) trace->reserve(total);
  double em = 1.0;
  std::size_t n = 0;
  while (n < total) {
    driver.next_symbol();
    for (std::size_t i = 0; i < cfg.symbol_length() && n < total; ++i, ++n) {
      auto& sample = driver.sample();
      driver.propagate(i);
      canceller.process(driver.front_end().known_transmit_history(), sample.q, sample.e);
      const bool need_em = trace || !run.convergence_sample || n + 1 == total;
      if (!need_em) continue;
      em = error_metric_linear(canceller.rls_state()->a_star, truth);
      if (trace) trace->push_back(em);
      if (!run.convergence_sample && em <= threshold) run.convergence_sample = n + 1;
    }
  }
  run.iterations = n;
  run.em_final_db = to_db_floored(em);
  return run;
}

// ---------------------------------------------------------------------------
// SINR / BER of several schemes on one realization
// ---------------------------------------------------------------------------

namespace detail {

struct SymbolStats {
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  double signal = 0.0;
  double interference = 0.0;
  double noise = 0.0;
};

struct SchemeLane {
  Scheme scheme;
  Canceller canceller;
  std::vector<CVector> e_frame;  // per receive antenna
  std::vector<SymbolStats> stats;  // per OFDM symbol
  std::optional<std::size_t> convergence_sample;
  double em_last = 0.0;
};

inline Canceller make_canceller(Scheme scheme, const SimConfig& cfg, const RelayScenario& scenario) {
  switch (scheme) {
    case Scheme::no_si:
    case Scheme::ni:
      return Canceller::passthrough();
    case Scheme::tdc:
      return Canceller::fixed(make_tdc(scenario.h_li_estimate, {cfg.m_r, cfg.m_t, cfg.l_li}));
    case Scheme::rls:
      return Canceller::adaptive(rls_init({cfg.m_r, cfg.m_t, cfg.l_a}, cfg.lambda, cfg.mu));
  }
  throw ConfigError("unknown scheme");
}

}  // namespace detail

/// Simulates cfg.ofdm_symbols OFDM symbols of one realization and evaluates
/// every scheme on the same draws. The no-SI scheme sees the relay input
/// without the loop term (signal + noise).
///
/// Statistics are gathered over whole OFDM symbols that start at or after
/// the scheme's window start: the RLS convergence sample when it converged,
/// otherwise cfg.warmup_samples.
inline std::vector<MetricsRecord> simulate_realization(const SimConfig& cfg, double sigma2_li_db,
                                                       std::uint64_t realization,
                                                       std::span<const Scheme> schemes) {
  RealizationDriver driver(cfg, draw_scenario(cfg, sigma2_li_db, realization), realization);
  const auto& scenario = driver.front_end().scenario();
  const std::size_t sym_len = cfg.symbol_length();
  const double threshold = db_to_linear(cfg.em_threshold_db);
  const bool em_defined = scenario.h_li.frobenius_norm_sq() > 0.0;
  const auto truth = StackedCoefficients::stack(pad_to_order(scenario.h_li, cfg.l_a));

  std::vector<detail::SchemeLane> lanes;
  for (Scheme s : schemes)
    lanes.push_back({s, detail::make_canceller(s, cfg, scenario),
                     std::vector<CVector>(cfg.m_r, CVector(sym_len)), {}, std::nullopt, 0.0});

  RelayDetector detector(scenario.h_sr, cfg.n_sub, cfg.n_cp, driver.source().stream_amplitude());
  const double inv_mr = 1.0 / static_cast<double>(cfg.m_r);
  std::size_t n = 0;
  for (std::size_t symbol = 0; symbol < cfg.ofdm_symbols; ++symbol) {
    driver.next_symbol();
    for (auto& lane : lanes) lane.stats.emplace_back();
    for (std::size_t i = 0; i < sym_len; ++i, ++n) {
      const auto& sample = driver.propagate(i);
      const double x_power = norm_sq(driver.current_source_sample());
      const double noise_power = norm_sq(sample.noise) * inv_mr;
      for (auto& lane : lanes) {
        auto& e = driver.sample().e;
        double interference = 0.0;
        if (lane.scheme == Scheme::no_si) {
          for (std::size_t r = 0; r < cfg.m_r; ++r) e[r] = sample.signal[r] + sample.noise[r];
        } else {
          lane.canceller.process(driver.front_end().known_transmit_history(), sample.q, e);
          for (std::size_t r = 0; r < cfg.m_r; ++r)
            interference += std::norm(sample.f[r] + (e[r] - sample.q[r]));
        }
        for (std::size_t r = 0; r < cfg.m_r; ++r) lane.e_frame[r][i] = e[r];
        auto& st = lane.stats.back();
        st.signal += x_power;
        st.noise += noise_power;
        st.interference += interference * inv_mr;

        if (const auto* rls = lane.canceller.rls_state(); rls && em_defined &&
            (!lane.convergence_sample || n + 1 == cfg.ofdm_symbols * sym_len)) {
          lane.em_last = error_metric_linear(rls->a_star, truth);
          if (!lane.convergence_sample && lane.em_last <= threshold) lane.convergence_sample = n + 1;
        }
      }
    }
    const auto& tx_bits = driver.source().bits();
    for (auto& lane : lanes) {
      const auto& rx_bits = detector.detect(lane.e_frame);
      auto& st = lane.stats.back();
      for (std::size_t s = 0; s < tx_bits.size(); ++s) {
        st.bits += tx_bits[s].size();
        st.errors += count_bit_errors(tx_bits[s], rx_bits[s]);
      }
    }
  }

  std::vector<MetricsRecord> records;
  for (const auto& lane : lanes) {
    MetricsRecord rec;
    rec.scheme = lane.scheme;
    rec.sigma2_li_db = sigma2_li_db;
    rec.realization = realization;
    rec.seed = derive_seed(cfg.master_seed, realization, StreamRole::channels);
    rec.convergence_sample = lane.convergence_sample;
    rec.em_final_db = lane.scheme == Scheme::rls ? to_db_floored(lane.em_last) : 0.0;
    if (lane.scheme == Scheme::tdc && em_defined)
      rec.em_final_db = error_metric(implied_estimate(*lane.canceller.filter()),
                                     StackedCoefficients::stack(scenario.h_li));
    rec.failed_subcarriers = detector.failed_subcarriers();

    const std::size_t window_start =
        lane.convergence_sample ? *lane.convergence_sample : cfg.warmup_samples;
    for (std::size_t symbol = 0; symbol < lane.stats.size(); ++symbol) {
      if (symbol * sym_len < window_start) continue;
      const auto& st = lane.stats[symbol];
      rec.bits += st.bits;
      rec.bit_errors += st.errors;
      rec.signal_power_sum += st.signal;
      rec.interference_power_sum += st.interference;
      rec.noise_power_sum += st.noise;
      rec.samples += sym_len;
      ++rec.symbols;
    }
    if (rec.samples > 0) {
      const auto ns = static_cast<double>(rec.samples);
      rec.sinr_db = sinr_db(rec.signal_power_sum / ns, rec.interference_power_sum / ns, rec.noise_power_sum / ns);
      rec.ber = rec.bits ? static_cast<double>(rec.bit_errors) / static_cast<double>(rec.bits) : 0.0;
    }
    records.push_back(rec);
  }
  return records;
}

}  // namespace fdrelay
