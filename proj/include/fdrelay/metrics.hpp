#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "fdrelay/relay_loop.hpp"
#include "fdrelay/types.hpp"

namespace fdrelay {

/// One realization of one scheme at one loop-channel power.
struct MetricsRecord {
  Scheme scheme = Scheme::rls;
  double sigma2_li_db = 0.0;
  double sinr_db = 0.0;
  double ber = 0.0;
  std::optional<std::size_t> convergence_sample;  // 1-based; empty if never converged
  double em_final_db = 0.0;
  std::uint64_t realization = 0;
  std::uint64_t seed = 0;

  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t symbols = 0;   // OFDM symbols counted
  std::uint64_t samples = 0;   // samples in the SINR window
  std::uint64_t failed_subcarriers = 0;

  // Sums over the SINR window; powers are these divided by `samples`.
  double signal_power_sum = 0.0;        // x^H x
  double interference_power_sum = 0.0;  // |i|^2 averaged over receive antennas
  double noise_power_sum = 0.0;         // |n_R|^2 averaged over receive antennas
};

/// Per-iteration error metric (dB) of one adaptation run.
using EmTrace = std::vector<double>;

/// 10 log10(P_x / (P_i + P_n)).
inline double sinr_db(double signal_power, double residual_interference_power, double noise_power) {
  if (!(noise_power > 0.0)) throw MetricError("sinr: noise power must be positive");
  if (!(residual_interference_power >= 0.0)) throw MetricError("sinr: negative interference power");
  return 10.0 * std::log10(signal_power / (residual_interference_power + noise_power));
}

inline std::uint64_t count_bit_errors(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx) {
  if (tx.size() != rx.size()) throw InputError("ber: bit streams differ in length");
  std::uint64_t errors = 0;
  for (std::size_t i = 0; i < tx.size(); ++i) errors += (tx[i] & 1u) != (rx[i] & 1u);
  return errors;
}

inline double ber(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx) {
  if (tx.empty()) throw InputError("ber: empty bit streams");
  return static_cast<double>(count_bit_errors(tx, rx)) / static_cast<double>(tx.size());
}

/// First 1-based index n with trace[n-1] <= threshold_db.
inline std::optional<std::size_t> convergence_time(std::span<const double> trace_db,
                                                   double threshold_db = -30.0) {
  for (std::size_t i = 0; i < trace_db.size(); ++i)
    if (trace_db[i] <= threshold_db) return i + 1;
  return std::nullopt;
}

struct Histogram {
  double start = 0.0;
  double bin_width = 100.0;
  std::vector<std::size_t> counts;
};

struct ConvergenceSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std_dev = 0.0;          // population standard deviation
  double lognormal_mu = 0.0;     // mean of ln(samples)
  double lognormal_sigma = 0.0;  // std of ln(samples)
  Histogram histogram;
};

inline ConvergenceSummary summarize_convergence(std::span<const double> samples, double bin_width = 100.0) {
  if (samples.empty()) throw MetricError("summarize_convergence: no converged realizations");
  if (!(bin_width > 0.0)) throw ConfigError("summarize_convergence: bin width must be positive");
  const auto n = static_cast<double>(samples.size());
  ConvergenceSummary s;
  s.count = samples.size();

  const auto moments = [n](std::span<const double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(ss / n)};
  };
  std::tie(s.mean, s.std_dev) = moments(samples);

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  std::vector<double> logs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] > 0.0)) throw MetricError("summarize_convergence: samples must be positive");
    logs[i] = std::log(samples[i]);
  }
  std::tie(s.lognormal_mu, s.lognormal_sigma) = moments(logs);

  s.histogram.bin_width = bin_width;
  s.histogram.start = std::floor(sorted.front() / bin_width) * bin_width;
  const auto bins = static_cast<std::size_t>(std::floor((sorted.back() - s.histogram.start) / bin_width)) + 1;
  s.histogram.counts.assign(bins, 0);
  for (double x : sorted) {
    auto b = static_cast<std::size_t>(std::floor((x - s.histogram.start) / bin_width));
    ++s.histogram.counts[std::min(b, bins - 1)];
  }
  return s;
}

}  // namespace fdrelay
