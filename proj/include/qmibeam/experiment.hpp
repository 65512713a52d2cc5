// SPDX-License-Identifier: Apache-2.0
//
// Batch experiment runner: SNR sweeps and spread (rank) sweeps over Monte
// Carlo trials, one CSV row per (grid point, trial, method). Rows are
// emitted in canonical grid/trial/method order and every floating-point
// field goes through one fixed printf format, so a fixed base seed gives
// byte-identical output. The trailing summary block holds per-method
// means recomputed as plain row-order sums over the emitted values.

#pragma once

#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "qmibeam/beamformer.hpp"
#include "qmibeam/scenario.hpp"

namespace qmibeam {

/// Either a constant or a coefficient applied to a matrix norm taken from
/// the instance ("0.1*norm(rhat)", "0.3*norm(rshat)", or "0.5").
struct ScaleRule {
  enum class Ref { Const, SampleCovNorm, SignalCovNorm };
  double coef = 0.0;
  Ref ref = Ref::Const;

  double evaluate(double sample_cov_norm, double signal_cov_norm) const {
    switch (ref) {
      case Ref::Const: return coef;
      case Ref::SampleCovNorm: return coef * sample_cov_norm;
      case Ref::SignalCovNorm: return coef * signal_cov_norm;
    }
    return coef;
  }

  static ScaleRule parse(const std::string& text, const std::string& origin) {
    ScaleRule r;
    const auto star = text.find('*');
    try {
      if (star == std::string::npos) {
        size_t pos = 0;
        r.coef = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing");
        r.ref = Ref::Const;
        return r;
      }
      size_t pos = 0;
      const std::string head = detail::KeyValueFile::trim(text.substr(0, star));
      r.coef = std::stod(head, &pos);
      if (pos != head.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ScenarioError(origin + ": bad scale rule '" + text + "'");
    }
    const std::string tail = detail::KeyValueFile::trim(text.substr(star + 1));
    if (tail == "norm(rhat)") r.ref = Ref::SampleCovNorm;
    else if (tail == "norm(rshat)") r.ref = Ref::SignalCovNorm;
    else throw ScenarioError(origin + ": bad scale rule '" + text + "'");
    return r;
  }
};

struct ExperimentConfig {
  enum class Mode { SnrSweep, RankSweep };

  std::string id = "experiment";
  Mode mode = Mode::SnrSweep;
  std::string scenario_path;
  std::vector<double> snr_grid_db;
  std::vector<double> spread_grid_deg = {0.15, 1, 2, 5, 9, 14, 20, 25, 30};
  double rank_sweep_snr_db = 10.0;
  int trials = 20;
  int full_trials = 100;
  Eigen::Index t_snapshots = 50;
  ScaleRule gamma_rule{0.1, ScaleRule::Ref::SampleCovNorm};
  ScaleRule eps_rule{0.3, ScaleRule::Ref::SignalCovNorm};
  std::uint64_t base_seed = 1;
  bool use_algorithm1 = true, use_plugin = true, use_optimal = true;

  static std::vector<double> parse_list(const std::string& text, const std::string& origin) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = detail::KeyValueFile::trim(tok);
      if (tok.empty()) continue;
      try {
        size_t pos = 0;
        out.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ScenarioError(origin + ": bad numeric list entry '" + tok + "'");
      }
    }
    if (out.empty()) throw ScenarioError(origin + ": empty numeric list");
    return out;
  }

  static ExperimentConfig parse(std::istream& in, const std::string& origin = "<config>") {
    const auto kv = detail::KeyValueFile::parse(in, origin);
    ExperimentConfig cfg;
    if (kv.has("id")) cfg.id = kv.require("id", origin);
    const std::string mode = kv.has("mode") ? kv.require("mode", origin) : "snr_sweep";
    if (mode == "snr_sweep") cfg.mode = Mode::SnrSweep;
    else if (mode == "rank_sweep") cfg.mode = Mode::RankSweep;
    else throw ScenarioError(origin + ": unknown mode '" + mode + "'");
    cfg.scenario_path = kv.require("scenario", origin);
    if (cfg.mode == Mode::SnrSweep)
      cfg.snr_grid_db = parse_list(kv.require("snr_grid_db", origin), origin);
    else {
      if (kv.has("spread_grid_deg"))
        cfg.spread_grid_deg = parse_list(kv.require("spread_grid_deg", origin), origin);
      cfg.rank_sweep_snr_db = kv.number_or("snr_db", 10.0, origin);
    }
    cfg.trials = static_cast<int>(kv.number_or("trials", 20, origin));
    cfg.full_trials = static_cast<int>(kv.number_or("full_trials", 100, origin));
    cfg.t_snapshots = static_cast<Eigen::Index>(kv.number_or("T", 50, origin));
    if (cfg.trials < 1 || cfg.t_snapshots < 1)
      throw ScenarioError(origin + ": trials and T must be >= 1");
    if (kv.has("gamma_rule"))
      cfg.gamma_rule = ScaleRule::parse(kv.require("gamma_rule", origin), origin);
    if (kv.has("eps_rule"))
      cfg.eps_rule = ScaleRule::parse(kv.require("eps_rule", origin), origin);
    cfg.base_seed = static_cast<std::uint64_t>(kv.number_or("base_seed", 1, origin));
    if (kv.has("methods")) {
      cfg.use_algorithm1 = cfg.use_plugin = cfg.use_optimal = false;
      std::stringstream ss(kv.require("methods", origin));
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        tok = detail::KeyValueFile::trim(tok);
        if (tok == "algorithm1") cfg.use_algorithm1 = true;
        else if (tok == "plugin") cfg.use_plugin = true;
        else if (tok == "optimal") cfg.use_optimal = true;
        else if (!tok.empty())
          throw ScenarioError(origin + ": unknown method '" + tok + "'");
      }
    }
    return cfg;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ScenarioError("cannot open experiment config: " + path);
    ExperimentConfig cfg = parse(f, path);
    // scenario paths resolve relative to the config file directory
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos && !cfg.scenario_path.empty() &&
        cfg.scenario_path.front() != '/')
      cfg.scenario_path = path.substr(0, slash + 1) + cfg.scenario_path;
    return cfg;
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

struct ResultRecord {
  std::string experiment;
  std::string grid_label;
  double grid_value = 0.0;
  Eigen::Index rank_rs = 0;
  int trial = 0;
  std::string method;
  double output_sinr_db = 0.0;
  bool has_diag = false;
  double relaxation_value = 0.0;
  double achieved_value = 0.0;
  Eigen::Index rank_of_w = 0;
  bool thm42 = false, cor43 = false, cor44 = false;
  bool rank_one_solver = false, constructed_optimal = false;
  int selected_branch = 0, n_branches = 0;
  double wall_ms = 0.0;

  static std::string header(bool timing) {
    std::string h =
        "experiment,grid_label,grid_value,rank_rs,trial,method,output_sinr_db,"
        "relaxation_value,achieved_value,rank_of_w,thm42,cor43,cor44,rank_one_solver,"
        "constructed_optimal,selected_branch,n_branches";
    if (timing) h += ",wall_time_ms";
    return h;
  }

  std::string csv(bool timing) const {
    using detail::fmt_num;
    std::string line = experiment + "," + grid_label + "," + fmt_num(grid_value) + "," +
                       std::to_string(rank_rs) + "," + std::to_string(trial) + "," + method +
                       "," + fmt_num(output_sinr_db) + ",";
    if (has_diag) {
      line += fmt_num(relaxation_value);
      line += ",";
      line += fmt_num(achieved_value);
      line += ",";
      line += std::to_string(rank_of_w) + "," + (thm42 ? "1" : "0") + "," +
              (cor43 ? "1" : "0") + "," + (cor44 ? "1" : "0") + "," +
              (rank_one_solver ? "1" : "0") + "," + (constructed_optimal ? "1" : "0") + "," +
              std::to_string(selected_branch) + "," + std::to_string(n_branches);
    } else {
      line += ",,,,,,,,,";
    }
    if (timing) line += "," + fmt_num(wall_ms);
    return line;
  }
};

struct ExperimentOptions {
  bool timing = false;
  std::ostream* log = nullptr;
  SolverOptions solver;
};

inline std::vector<ResultRecord> run_experiment_records(const ExperimentConfig& cfg,
                                                        const Scenario& base_scenario,
                                                        const ExperimentOptions& exo = {}) {
  std::vector<ResultRecord> records;
  const std::vector<double>& grid =
      cfg.mode == ExperimentConfig::Mode::SnrSweep ? cfg.snr_grid_db : cfg.spread_grid_deg;
  const std::string grid_label =
      cfg.mode == ExperimentConfig::Mode::SnrSweep ? "snr_db" : "spread_deg";

  for (double grid_value : grid) {
    Scenario sc = base_scenario;
    if (cfg.mode == ExperimentConfig::Mode::SnrSweep) {
      sc.signal.power_db = grid_value;
    } else {
      sc.signal.density.spread = grid_value;
      sc.signal.power_db = cfg.rank_sweep_snr_db;
    }
    const HermitianMatrix signal_cov_true = sc.true_signal_cov();
    const HermitianMatrix noise_cov_true = sc.interference_noise_cov();
    const HermitianMatrix signal_cov_presumed = sc.presumed_signal_cov();
    const double presumed_norm = frob_norm(signal_cov_presumed);
    const Eigen::Index rank_rs = numeric_rank(signal_cov_true, kScatterRankTol);

    double optimal_value_db = 0.0;
    if (cfg.use_optimal) {
      const auto [value, w] = optimal_sinr(signal_cov_true, noise_cov_true);
      (void)w;
      optimal_value_db = 10.0 * std::log10(value);
    }

    for (int trial = 0; trial < cfg.trials; ++trial) {
      const HermitianMatrix sample_cov =
          simulate_snapshots(sc, cfg.t_snapshots, cfg.base_seed + std::uint64_t(trial));
      const double gamma = cfg.gamma_rule.evaluate(frob_norm(sample_cov), presumed_norm);
      const double eps = cfg.eps_rule.evaluate(frob_norm(sample_cov), presumed_norm);

      ResultRecord proto;
      proto.experiment = cfg.id;
      proto.grid_label = grid_label;
      proto.grid_value = grid_value;
      proto.rank_rs = rank_rs;
      proto.trial = trial;

      if (cfg.use_algorithm1) {
        ResultRecord rec = proto;
        rec.method = "algorithm1";
        const auto start = std::chrono::steady_clock::now();
        const auto [w, diag] =
            algorithm1(sample_cov, signal_cov_presumed, UncertaintyModel(gamma, eps),
                       exo.solver);
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
        rec.output_sinr_db = 10.0 * std::log10(output_sinr(w, signal_cov_true, noise_cov_true));
        rec.has_diag = true;
        rec.relaxation_value = diag.relaxation_value;
        rec.achieved_value = diag.achieved_value;
        rec.rank_of_w = diag.rank_of_w;
        rec.thm42 = diag.certificate.thm42_holds;
        rec.cor43 = diag.certificate.cor43_holds;
        rec.cor44 = diag.certificate.cor44_holds;
        rec.rank_one_solver = diag.certificate.rank_one_at_solver;
        rec.constructed_optimal = diag.certificate.constructed_optimal;
        rec.selected_branch = diag.selected_index;
        rec.n_branches = int(diag.per_branch_values.size());
        if (exo.log)
          (*exo.log) << cfg.id << " " << grid_label << "=" << detail::fmt_num(grid_value)
                     << " trial=" << trial << " iters=" << diag.solver_iterations
                     << " relaxation=" << detail::fmt_num(diag.relaxation_value)
                     << " achieved=" << detail::fmt_num(diag.achieved_value)
                     << " rank=" << diag.rank_of_w << "\n";
        records.push_back(std::move(rec));
      }
      if (cfg.use_plugin) {
        ResultRecord rec = proto;
        rec.method = "plugin";
        const auto start = std::chrono::steady_clock::now();
        const BeamWeights w = plugin_beamformer(sample_cov, signal_cov_presumed, gamma);
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
        rec.output_sinr_db = 10.0 * std::log10(output_sinr(w, signal_cov_true, noise_cov_true));
        records.push_back(std::move(rec));
      }
      if (cfg.use_optimal) {
        ResultRecord rec = proto;
        rec.method = "optimal";
        rec.output_sinr_db = optimal_value_db;
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

inline void write_csv(const std::vector<ResultRecord>& records, std::ostream& out,
                      bool timing = false) {
  out << ResultRecord::header(timing) << "\n";
  for (const ResultRecord& rec : records) out << rec.csv(timing) << "\n";

  // summary block: plain row-order means per (grid point, method)
  out << "# summary\n";
  out << "# experiment,grid_label,grid_value,method,mean_output_sinr_db,records\n";
  std::vector<std::tuple<std::string, double, std::string, double, int>> acc;
  for (const ResultRecord& rec : records) {
    bool found = false;
    for (auto& [exp, gv, method, sum, count] : acc) {
      if (exp == rec.experiment && gv == rec.grid_value && method == rec.method) {
        sum += rec.output_sinr_db;
        ++count;
        found = true;
        break;
      }
    }
    if (!found) acc.emplace_back(rec.experiment, rec.grid_value, rec.method,
                                 rec.output_sinr_db, 1);
  }
  for (const auto& [exp, gv, method, sum, count] : acc) {
    out << "# " << exp << "," << (records.empty() ? "" : records.front().grid_label) << ","
        << detail::fmt_num(gv) << "," << method << ","
        << detail::fmt_num(sum / double(count)) << "," << count << "\n";
  }
}

inline void run_experiment(const ExperimentConfig& cfg, std::ostream& out,
                           const ExperimentOptions& exo = {}) {
  const Scenario base = load_scenario(cfg.scenario_path);
  write_csv(run_experiment_records(cfg, base, exo), out, exo.timing);
}

}  // namespace qmibeam
