#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fdrelay/config.hpp"
#include "fdrelay/metrics.hpp"
#include "fdrelay/simulation.hpp"

namespace fdrelay {

inline constexpr const char* kToolVersion = "1.0.0";

/// Runs fn(i) for i in [0, count) on `workers` threads pulling from a shared
/// counter. If any call throws, the exception of the smallest index is
/// rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  const auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, count));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Provenance {
  std::string tool_version = kToolVersion;
  std::string timestamp;
  std::uint64_t master_seed = 0;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Aggregate of all realizations of one scheme at one sigma2_li.
struct SweepRow {
  Scheme scheme = Scheme::rls;
  double sigma2_li_db = 0.0;
  double sinr_db = 0.0;
  double ber = 0.0;
  std::uint64_t realizations = 0;
  std::uint64_t samples = 0;
  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t converged = 0;
};

struct ExperimentResult {
  Experiment kind = Experiment::convergence;
  SimConfig config;
  Provenance provenance;
  std::vector<MetricsRecord> records;  // sorted by (scheme, sigma2_li_db, realization)
  std::vector<SweepRow> rows;          // sweeps only, sorted by (scheme, sigma2_li_db)
  std::optional<ConvergenceSummary> summary;
  std::size_t non_converged = 0;
};

namespace detail {

inline ExperimentResult start_result(Experiment kind, const SimConfig& cfg) {
  cfg.validate_or_throw(kind);
  ExperimentResult r;
  r.kind = kind;
  r.config = cfg;
  r.provenance.timestamp = utc_timestamp();
  r.provenance.master_seed = cfg.master_seed;
  return r;
}

inline bool record_order(const MetricsRecord& a, const MetricsRecord& b) {
  const auto sa = to_string(a.scheme), sb = to_string(b.scheme);
  if (sa != sb) return sa < sb;
  if (a.sigma2_li_db != b.sigma2_li_db) return a.sigma2_li_db < b.sigma2_li_db;
  return a.realization < b.realization;
}

inline std::vector<SweepRow> aggregate(const std::vector<MetricsRecord>& records) {
  std::vector<SweepRow> rows;
  std::vector<double> sig, intf, noise;
  for (const auto& rec : records) {
    if (rows.empty() || rows.back().scheme != rec.scheme || rows.back().sigma2_li_db != rec.sigma2_li_db) {
      rows.push_back({rec.scheme, rec.sigma2_li_db});
      sig.push_back(0.0);
      intf.push_back(0.0);
      noise.push_back(0.0);
    }
    auto& row = rows.back();
    ++row.realizations;
    row.samples += rec.samples;
    row.bits += rec.bits;
    row.bit_errors += rec.bit_errors;
    row.converged += rec.convergence_sample.has_value();
    sig.back() += rec.signal_power_sum;
    intf.back() += rec.interference_power_sum;
    noise.back() += rec.noise_power_sum;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    if (row.samples == 0) throw MetricError("sweep: no samples fell inside the statistics window");
    const auto ns = static_cast<double>(row.samples);
    row.sinr_db = sinr_db(sig[i] / ns, intf[i] / ns, noise[i] / ns);
    row.ber = row.bits ? static_cast<double>(row.bit_errors) / static_cast<double>(row.bits) : 0.0;
  }
  return rows;
}

}  // namespace detail

/// RLS convergence-time distribution over cfg.realizations fresh realizations.
inline ExperimentResult run_convergence(const SimConfig& cfg) {
  auto result = detail::start_result(Experiment::convergence, cfg);
  if (db_to_linear(cfg.sigma2_li_db.front()) == 0.0)
    throw MetricError("convergence: error metric undefined for a zero loop channel (sigma2_li = 0)");

  std::vector<ConvergenceRun> runs(cfg.realizations);
  parallel_for(cfg.realizations, cfg.workers, [&](std::size_t i) { runs[i] = simulate_convergence(cfg, i); });

  std::vector<double> converged;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    MetricsRecord rec;
    rec.scheme = Scheme::rls;
    rec.sigma2_li_db = cfg.sigma2_li_db.front();
    rec.realization = i;
    rec.seed = derive_seed(cfg.master_seed, i, StreamRole::channels);
    rec.convergence_sample = runs[i].convergence_sample;
    rec.em_final_db = runs[i].em_final_db;
    rec.samples = runs[i].iterations;
    result.records.push_back(rec);
    if (rec.convergence_sample)
      converged.push_back(static_cast<double>(*rec.convergence_sample));
    else
      ++result.non_converged;
  }
  if (!converged.empty()) result.summary = summarize_convergence(converged);
  return result;
}

/// Ensemble-mean linear error metric after each of the first `iterations`
/// RLS updates, over cfg.realizations realizations.
inline std::vector<double> ensemble_mean_em(const SimConfig& cfg, std::size_t iterations) {
  cfg.validate_or_throw(Experiment::convergence);
  std::vector<std::vector<double>> traces(cfg.realizations);
  parallel_for(cfg.realizations, cfg.workers, [&](std::size_t i) {
    simulate_convergence(cfg, i, &traces[i], iterations);
  });
  std::vector<double> mean(iterations, 0.0);
  for (const auto& t : traces)
    for (std::size_t n = 0; n < iterations; ++n) mean[n] += t[n];
  for (auto& v : mean) v /= static_cast<double>(cfg.realizations);
  return mean;
}

namespace detail {

inline ExperimentResult run_sweep(Experiment kind, const SimConfig& cfg) {
  auto result = start_result(kind, cfg);
  const std::size_t points = cfg.sigma2_li_db.size();
  const std::size_t jobs = points * cfg.realizations;
  std::vector<std::vector<MetricsRecord>> out(jobs);
  parallel_for(jobs, cfg.workers, [&](std::size_t job) {
    const std::size_t point = job / cfg.realizations;
    const std::size_t realization = job % cfg.realizations;
    out[job] = simulate_realization(cfg, cfg.sigma2_li_db[point], realization, cfg.schemes);
  });
  for (auto& recs : out)
    for (auto& r : recs) result.records.push_back(r);
  std::sort(result.records.begin(), result.records.end(), record_order);
  result.rows = aggregate(result.records);
  return result;
}

}  // namespace detail

/// Post-convergence SINR per (scheme, sigma2_li).
inline ExperimentResult run_sinr_sweep(const SimConfig& cfg) {
  return detail::run_sweep(Experiment::sinr_sweep, cfg);
}

/// BER at the relay per (scheme, sigma2_li); the no-si scheme is the
/// interference-free (half-duplex equivalent) reference.
inline ExperimentResult run_ber_sweep(const SimConfig& cfg) {
  return detail::run_sweep(Experiment::ber_sweep, cfg);
}

// ---------------------------------------------------------------------------
// CSV output. Lines starting with '#' carry provenance and the resolved
// configuration; the header row and the body follow.
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_csv_body(std::ostream& os, const ExperimentResult& r) {
  switch (r.kind) {
    case Experiment::convergence:
      os << "realization,seed,converged,convergence_sample,em_final_db\n";
      for (const auto& rec : r.records) {
        os << rec.realization << ',' << rec.seed << ',' << (rec.convergence_sample ? 1 : 0) << ',';
        if (rec.convergence_sample) os << *rec.convergence_sample;
        os << ',' << format_number(rec.em_final_db) << '\n';
      }
      break;
    case Experiment::sinr_sweep:
      os << "scheme,sigma2_li_db,sinr_db,realizations,samples_per_point\n";
      for (const auto& row : r.rows)
        os << to_string(row.scheme) << ',' << format_number(row.sigma2_li_db) << ','
           << format_number(row.sinr_db) << ',' << row.realizations << ',' << row.samples << '\n';
      break;
    case Experiment::ber_sweep:
      os << "scheme,sigma2_li_db,ber,bits_counted,bit_errors\n";
      for (const auto& row : r.rows)
        os << to_string(row.scheme) << ',' << format_number(row.sigma2_li_db) << ','
           << format_number(row.ber) << ',' << row.bits << ',' << row.bit_errors << '\n';
      break;
  }
}

inline std::string csv_body(const ExperimentResult& r) {
  std::ostringstream os;
  write_csv_body(os, r);
  return os.str();
}

inline void write_csv(std::ostream& os, const ExperimentResult& r) {
  os << "# experiment=" << to_string(r.kind) << '\n';
  os << "# tool_version=" << r.provenance.tool_version << '\n';
  os << "# timestamp=" << r.provenance.timestamp << '\n';
  os << "# master_seed=" << r.provenance.master_seed << '\n';
  for (const auto& [k, v] : r.config.to_key_values()) os << "# " << k << '=' << v << '\n';
  write_csv_body(os, r);
}

inline void write_histogram_csv(std::ostream& os, const ConvergenceSummary& s) {
  os << "bin_start,bin_end,count\n";
  for (std::size_t b = 0; b < s.histogram.counts.size(); ++b) {
    const double lo = s.histogram.start + static_cast<double>(b) * s.histogram.bin_width;
    os << format_number(lo) << ',' << format_number(lo + s.histogram.bin_width) << ','
       << s.histogram.counts[b] << '\n';
  }
}

}  // namespace fdrelay
