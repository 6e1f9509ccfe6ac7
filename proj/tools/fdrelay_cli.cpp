// Command-line front end for the full-duplex relay simulator.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "fdrelay/experiment.hpp"

namespace {

using fdrelay::ConfigError;
using fdrelay::Experiment;
using fdrelay::SimConfig;

constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;

std::size_t to_size(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError(field + ": expected a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(field + ": expected a number, got '" + v + "'");
  }
}

std::vector<fdrelay::Scheme> to_schemes(const std::string& v) {
  std::vector<fdrelay::Scheme> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto name = v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto s = fdrelay::parse_scheme(name);
    if (!s) throw ConfigError("scheme: unknown scheme '" + name + "' (expected ni, tdc, rls or no-si)");
    out.push_back(*s);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// A SimConfig field exposed as a string-valued flag; applied only when set
/// on the command line or in the config file.
struct FieldOption {
  std::string value;
  CLI::Option* option = nullptr;
  std::function<void(SimConfig&, const std::string&)> apply;
};

class FieldRegistry {
 public:
  explicit FieldRegistry(CLI::App& app) : app_(app) {}

  void add(const std::string& name, const std::string& help,
           std::function<void(SimConfig&, const std::string&)> apply, const std::string& type = "TEXT") {
    auto& f = fields_[name];
    f.apply = std::move(apply);
    f.option = app_.add_option("--" + name, f.value, help)->group("Simulation")->type_name(type);
  }

  void add_size(const std::string& name, const std::string& help, std::size_t SimConfig::*member) {
    add(name, help, [name, member](SimConfig& c, const std::string& v) { c.*member = to_size(name, v); }, "UINT");
  }

  void add_double(const std::string& name, const std::string& help, double SimConfig::*member) {
    add(name, help, [name, member](SimConfig& c, const std::string& v) { c.*member = to_double(name, v); }, "FLOAT");
  }

  void apply(SimConfig& cfg) const {
    for (const auto& [name, f] : fields_)
      if (f.option->count() > 0) f.apply(cfg, f.value);
  }

 private:
  CLI::App& app_;
  std::map<std::string, FieldOption> fields_;
};

void register_fields(FieldRegistry& r) {
  r.add_size("n-s", "source streams", &SimConfig::n_s);
  r.add_size("n-d", "destination antennas (not simulated)", &SimConfig::n_d);
  r.add_size("m-r", "relay receive antennas", &SimConfig::m_r);
  r.add_size("m-t", "relay transmit antennas", &SimConfig::m_t);
  r.add_size("l-sr", "source-relay channel order", &SimConfig::l_sr);
  r.add_size("l-rd", "relay-destination channel order (not simulated)", &SimConfig::l_rd);
  r.add_size("l-li", "loop channel order", &SimConfig::l_li);
  r.add_size("l-a", "canceller filter order", &SimConfig::l_a);
  r.add_size("n-sub", "OFDM subcarriers", &SimConfig::n_sub);
  r.add_size("n-cp", "cyclic prefix length", &SimConfig::n_cp);
  r.add("sigma2-li-db", "loop channel power grid: start:stop:step, list, or value",
        [](SimConfig& c, const std::string& v) { c.sigma2_li_db = fdrelay::parse_grid(v); }, "GRID");
  r.add("sigma2-nr-db", "receiver noise power (dB, -inf for none)",
        [](SimConfig& c, const std::string& v) { c.sigma2_nr_db = to_double("sigma2-nr-db", v); }, "FLOAT");
  r.add_double("delta", "transmit impairment power ratio", &SimConfig::delta);
  r.add_double("alpha", "TDC channel estimation error ratio", &SimConfig::alpha);
  r.add_double("lambda", "RLS forgetting factor", &SimConfig::lambda);
  r.add_double("mu", "RLS step size", &SimConfig::mu);
  r.add_double("em-threshold-db", "convergence threshold on the error metric", &SimConfig::em_threshold_db);
  r.add_double("source-power", "source power E{x^H x} (linear)", &SimConfig::source_power);
  r.add_double("relay-power", "relay transmit power E{t^H t} (linear)", &SimConfig::relay_power);
  r.add_size("ofdm-symbols", "OFDM symbols per realization (sweeps)", &SimConfig::ofdm_symbols);
  r.add_size("convergence-symbols", "OFDM symbols of adaptation per realization", &SimConfig::convergence_symbols);
  r.add_size("warmup-samples", "samples excluded before statistics for non-adaptive schemes",
             &SimConfig::warmup_samples);
  r.add_size("realizations", "Monte-Carlo realizations per point", &SimConfig::realizations);
  r.add("master-seed", "master seed",
        [](SimConfig& c, const std::string& v) { c.master_seed = to_size("master-seed", v); }, "UINT");
  r.add("scheme", "scheme or comma list: ni, tdc, rls, no-si",
        [](SimConfig& c, const std::string& v) { c.schemes = to_schemes(v); }, "LIST");
  r.add_size("workers", "worker threads", &SimConfig::workers);
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file '" + path + "'");
  return file;
}

void print_summary(const fdrelay::ExperimentResult& r) {
  if (r.kind == Experiment::convergence) {
    std::cerr << "realizations: " << r.records.size() << ", not converged: " << r.non_converged << '\n';
    if (r.summary) {
      const auto& s = *r.summary;
      std::cerr << "convergence samples: mean " << s.mean << ", median " << s.median << ", std "
                << s.std_dev << ", lognormal mu " << s.lognormal_mu << " sigma " << s.lognormal_sigma << '\n';
    }
    return;
  }
  for (const auto& row : r.rows)
    std::cerr << fdrelay::to_string(row.scheme) << " sigma2_li=" << row.sigma2_li_db
              << " dB: SINR " << row.sinr_db << " dB, BER " << row.ber << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-duplex MIMO-OFDM relay self-interference cancellation simulator"};
  app.set_config("--config", "", "key=value configuration file (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();

  FieldRegistry fields(app);
  register_fields(fields);

  std::string output, histogram_output, trace_output;
  std::size_t trace_length = 0;
  bool paper_scale = false;

  auto* conv = app.add_subcommand("convergence", "RLS convergence-time distribution");
  conv->add_option("-o,--output", output, "CSV output (default stdout)");
  conv->add_option("--histogram-output", histogram_output, "histogram CSV of converged realizations");
  conv->add_option("--trace-output", trace_output, "ensemble-mean error metric per iteration");
  conv->add_option("--trace-length", trace_length, "iterations in the ensemble trace")->default_val(4000);

  auto* sinr = app.add_subcommand("sinr-sweep", "post-convergence SINR versus loop channel power");
  sinr->add_option("-o,--output", output, "CSV output (default stdout)");
  sinr->add_flag("--paper-scale", paper_scale, "N_sub = 8192 and 2000 OFDM symbols");

  auto* ber = app.add_subcommand("ber-sweep", "BER at the relay versus loop channel power");
  ber->add_option("-o,--output", output, "CSV output (default stdout)");
  ber->add_flag("--paper-scale", paper_scale, "N_sub = 8192 and 2000 OFDM symbols");

  std::string validate_for = "sinr-sweep";
  auto* validate = app.add_subcommand("validate-config", "check a configuration and print it resolved");
  validate->add_option("--for", validate_for, "experiment the configuration is meant for")
      ->check(CLI::IsMember({"convergence", "sinr-sweep", "ber-sweep"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    Experiment kind = Experiment::sinr_sweep;
    if (conv->parsed()) kind = Experiment::convergence;
    if (ber->parsed()) kind = Experiment::ber_sweep;
    if (validate->parsed())
      kind = validate_for == "convergence" ? Experiment::convergence
             : validate_for == "ber-sweep" ? Experiment::ber_sweep
                                           : Experiment::sinr_sweep;

    SimConfig cfg = SimConfig::defaults_for(kind);
    if (paper_scale) {
      cfg.n_sub = 8192;
      cfg.ofdm_symbols = 2000;
    }
    fields.apply(cfg);

    if (validate->parsed()) {
      const auto errors = cfg.validate(kind);
      for (const auto& [k, v] : cfg.to_key_values()) std::cout << k << '=' << v << '\n';
      for (const auto& e : errors) std::cerr << "error: " << e << '\n';
      return errors.empty() ? 0 : kExitConfigError;
    }

    fdrelay::ExperimentResult result;
    switch (kind) {
      case Experiment::convergence: result = fdrelay::run_convergence(cfg); break;
      case Experiment::sinr_sweep: result = fdrelay::run_sinr_sweep(cfg); break;
      case Experiment::ber_sweep: result = fdrelay::run_ber_sweep(cfg); break;
    }

    std::ofstream file;
    fdrelay::write_csv(open_output(output, file), result);
    print_summary(result);

    if (kind == Experiment::convergence && !histogram_output.empty() && result.summary) {
      std::ofstream hist(histogram_output);
      fdrelay::write_histogram_csv(hist, *result.summary);
    }
    if (kind == Experiment::convergence && !trace_output.empty()) {
      const auto mean = fdrelay::ensemble_mean_em(cfg, trace_length);
      std::ofstream trace(trace_output);
      trace << "iteration,mean_em_db\n";
      for (std::size_t n = 0; n < mean.size(); ++n)
        trace << n + 1 << ',' << fdrelay::format_number(fdrelay::to_db_floored(mean[n])) << '\n';
    }
    return 0;
  } catch (const fdrelay::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const fdrelay::MetricError& e) {
    std::cerr << "configuration rejected: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const fdrelay::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
