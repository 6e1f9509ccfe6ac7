#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fdrelay/relay_loop.hpp"
#include "fdrelay/types.hpp"

namespace fdrelay {

enum class Experiment { convergence, sinr_sweep, ber_sweep };

inline std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::convergence: return "convergence";
    case Experiment::sinr_sweep: return "sinr-sweep";
    case Experiment::ber_sweep: return "ber-sweep";
  }
  return "unknown";
}

/// dB to linear power; -inf maps to 0.
inline double db_to_linear(double db) {
  if (std::isinf(db) && db < 0) return 0.0;
  return std::pow(10.0, db / 10.0);
}

/// Parses "start:stop:step" (inclusive), a comma list, or a single value.
/// Values may be "-inf".
inline std::vector<double> parse_grid(std::string_view text) {
  const auto parse_one = [](std::string_view s) {
    std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + str + "'");
    }
    if (used != str.size()) throw ConfigError("cannot parse number '" + str + "'");
    return v;
  };
  std::vector<double> out;
  const auto colon = std::count(text.begin(), text.end(), ':');
  if (colon == 2) {
    const auto a = text.find(':');
    const auto b = text.find(':', a + 1);
    const double start = parse_one(text.substr(0, a));
    const double stop = parse_one(text.substr(a + 1, b - a - 1));
    const double step = parse_one(text.substr(b + 1));
    if (!(step > 0.0) || !(stop >= start) || !std::isfinite(start) || !std::isfinite(stop))
      throw ConfigError("grid '" + std::string(text) + "' must satisfy start <= stop and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  if (colon != 0) throw ConfigError("grid '" + std::string(text) + "' must be start:stop:step");
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
    out.push_back(parse_one(piece));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Every scalar knob of a simulation. Power levels are in dB unless noted;
/// `source_power` and `relay_power` are linear E{x^H x} and E{t~^H t~}.
struct SimConfig {
  std::size_t n_s = 2;
  std::size_t n_d = 2;  // destination antennas; the destination hop is not simulated
  std::size_t m_r = 3;
  std::size_t m_t = 3;
  std::size_t l_sr = 1;
  std::size_t l_rd = 1;  // unused, kept for completeness of the scenario description
  std::size_t l_li = 1;
  std::size_t l_a = 1;
  std::size_t n_sub = 8192;
  std::size_t n_cp = 1;
  std::vector<double> sigma2_li_db = {0.0};
  double sigma2_nr_db = -15.0;
  double delta = 1e-5;
  double alpha = 1e-2;
  double lambda = 1.0;
  double mu = 1.0;
  double em_threshold_db = -30.0;
  double source_power = 1.0;
  double relay_power = 1.0;
  std::size_t ofdm_symbols = 2000;
  std::size_t convergence_symbols = 4;
  std::size_t warmup_samples = 2014;
  std::size_t realizations = 500;
  std::uint64_t master_seed = 42;
  std::vector<Scheme> schemes = {Scheme::rls};
  std::size_t workers = 1;

  static SimConfig convergence_defaults() { return SimConfig{}; }

  /// Desk-scale sweep: N_sub = 1024, 200 OFDM symbols, -10..40 dB in 5 dB steps.
  static SimConfig sweep_defaults() {
    SimConfig c;
    c.n_sub = 1024;
    c.ofdm_symbols = 200;
    c.sigma2_li_db = parse_grid("-10:40:5");
    c.realizations = 50;
    c.schemes = {Scheme::no_si, Scheme::ni, Scheme::tdc, Scheme::rls};
    return c;
  }

  static SimConfig defaults_for(Experiment e) {
    return e == Experiment::convergence ? convergence_defaults() : sweep_defaults();
  }

  std::size_t symbol_length() const noexcept { return n_sub + n_cp; }
  double noise_variance() const { return db_to_linear(sigma2_nr_db); }

  bool has_scheme(Scheme s) const {
    return std::find(schemes.begin(), schemes.end(), s) != schemes.end();
  }

  /// Returns one "field: problem" line per violated constraint.
  std::vector<std::string> validate(Experiment experiment) const {
    std::vector<std::string> errors;
    const auto require = [&errors](bool ok, std::string msg) {
      if (!ok) errors.push_back(std::move(msg));
    };
    require(n_s >= 1, "n_s: must be >= 1");
    require(m_r >= 1, "m_r: must be >= 1");
    require(m_t >= 1, "m_t: must be >= 1");
    require(m_r >= n_s, "m_r: zero-forcing detection needs m_r >= n_s");
    require(n_sub >= 1, "n_sub: must be >= 1");
    require(n_cp >= std::max(l_sr, l_li), "n_cp: must be >= max(l_sr, l_li)");
    require(n_cp <= n_sub, "n_cp: must not exceed n_sub");
    require(l_a >= l_li, "l_a: canceller order must be >= l_li");
    require(!sigma2_li_db.empty(), "sigma2_li_db: grid is empty");
    for (double v : sigma2_li_db)
      require(!std::isnan(v) && !(std::isinf(v) && v > 0), "sigma2_li_db: values must be finite or -inf");
    require(!std::isnan(sigma2_nr_db) && !(std::isinf(sigma2_nr_db) && sigma2_nr_db > 0),
            "sigma2_nr_db: must be finite or -inf");
    require(delta >= 0.0 && std::isfinite(delta), "delta: must be finite and >= 0");
    require(alpha >= 0.0 && std::isfinite(alpha), "alpha: must be finite and >= 0");
    require(lambda > 0.0 && lambda <= 1.0, "lambda: must lie in (0, 1]");
    require(mu > 0.0 && std::isfinite(mu), "mu: must be positive");
    require(std::isfinite(em_threshold_db), "em_threshold_db: must be finite");
    require(source_power >= 0.0 && std::isfinite(source_power), "source_power: must be finite and >= 0");
    require(relay_power > 0.0 && std::isfinite(relay_power), "relay_power: must be finite and > 0");
    require(realizations >= 1, "realizations: must be >= 1");
    require(workers >= 1, "workers: must be >= 1");
    require(!schemes.empty(), "scheme: at least one scheme required");
    if (experiment == Experiment::convergence) {
      require(schemes.size() == 1 && schemes.front() == Scheme::rls, "scheme: convergence requires scheme rls");
      require(sigma2_li_db.size() == 1, "sigma2_li_db: convergence takes a single value");
      require(convergence_symbols >= 1, "convergence_symbols: must be >= 1");
    } else {
      require(ofdm_symbols >= 1, "ofdm_symbols: must be >= 1");
      require(sigma2_nr_db > -std::numeric_limits<double>::infinity(),
              "sigma2_nr_db: sweeps need positive noise power for the SINR");
    }
    return errors;
  }

  void validate_or_throw(Experiment experiment) const {
    const auto errors = validate(experiment);
    if (errors.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }

  /// Resolved configuration as ordered key/value pairs (config-file syntax).
  std::vector<std::pair<std::string, std::string>> to_key_values() const {
    const auto num = [](double v) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, res.ptr);
    };
    std::string grid;
    for (std::size_t i = 0; i < sigma2_li_db.size(); ++i) grid += (i ? "," : "") + num(sigma2_li_db[i]);
    std::string scheme_list;
    for (std::size_t i = 0; i < schemes.size(); ++i)
      scheme_list += (i ? "," : "") + std::string(to_string(schemes[i]));
    return {
        {"n-s", std::to_string(n_s)},
        {"n-d", std::to_string(n_d)},
        {"m-r", std::to_string(m_r)},
        {"m-t", std::to_string(m_t)},
        {"l-sr", std::to_string(l_sr)},
        {"l-rd", std::to_string(l_rd)},
        {"l-li", std::to_string(l_li)},
        {"l-a", std::to_string(l_a)},
        {"n-sub", std::to_string(n_sub)},
        {"n-cp", std::to_string(n_cp)},
        {"sigma2-li-db", grid},
        {"sigma2-nr-db", num(sigma2_nr_db)},
        {"delta", num(delta)},
        {"alpha", num(alpha)},
        {"lambda", num(lambda)},
        {"mu", num(mu)},
        {"em-threshold-db", num(em_threshold_db)},
        {"source-power", num(source_power)},
        {"relay-power", num(relay_power)},
        {"ofdm-symbols", std::to_string(ofdm_symbols)},
        {"convergence-symbols", std::to_string(convergence_symbols)},
        {"warmup-samples", std::to_string(warmup_samples)},
        {"realizations", std::to_string(realizations)},
        {"master-seed", std::to_string(master_seed)},
        {"scheme", scheme_list},
        {"workers", std::to_string(workers)},
    };
  }
};

}  // namespace fdrelay
