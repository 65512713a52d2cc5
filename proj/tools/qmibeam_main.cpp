// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end.
//
//   qmibeam solve      --rhat R.txt --rshat RS.txt --gamma G --eps E
//   qmibeam experiment --config example1.cfg [--out results.csv]
//   qmibeam certify    --solution solution.json
//
// Exit codes: 0 success, 2 input/parse error, 3 solver failure,
// 4 certification check failed.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "qmibeam/beamformer.hpp"
#include "qmibeam/experiment.hpp"
#include "qmibeam/matrix_io.hpp"

namespace {

constexpr int kExitInputError = 2;
constexpr int kExitSolverFailure = 3;
constexpr int kExitCheckFailed = 4;

using namespace qmibeam;
using nlohmann::json;

json matrix_to_json(const HermitianMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.dim(); ++k)
      row.push_back({m.mat()(i, k).real(), m.mat()(i, k).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

HermitianMatrix matrix_from_json(const json& rows) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      m(i, k) = Complex(rows.at(size_t(i)).at(size_t(k)).at(0).get<double>(),
                        rows.at(size_t(i)).at(size_t(k)).at(1).get<double>());
  return HermitianMatrix(m);
}

json vector_to_json(const CVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v[i].real(), v[i].imag()});
  return out;
}

void print_certificates(const CertificateReport& rep, std::ostream& out) {
  const auto yn = [](bool b) { return b ? "yes" : "no"; };
  out << "certificates:\n";
  out << "  applicable (positive value): " << yn(rep.applicable) << "\n";
  out << "  rank_one_at_solver: " << yn(rep.rank_one_at_solver) << "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "  thm42: %s (lhs %.10g, rhs %.10g)\n",
                yn(rep.thm42_holds), rep.thm42.lhs, rep.thm42.rhs);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  cor43: %s (lhs %.10g, rhs %.10g)\n",
                yn(rep.cor43_holds), rep.cor43.lhs, rep.cor43.rhs);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  cor44: %s (lhs %.10g, rhs %.10g)\n",
                yn(rep.cor44_holds), rep.cor44.lhs, rep.cor44.rhs);
  out << buf;
  out << "  constructed_optimal: " << yn(rep.constructed_optimal) << "\n";
}

void print_kkt(const KktReport& r, std::ostream& out) {
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "kkt residuals:\n  comp1 %.3e  comp2 %.3e  comp3 %.3e  compact %.3e\n"
                "  primal %.3e  dual %.3e  relative gap %.3e\n",
                r.r_comp1, r.r_comp2, r.r_comp3, r.r_compact, r.r_primal, r.r_dual, r.r_gap);
  out << buf;
}

int run_solve(const std::string& rhat_path, const std::string& rshat_path, double gamma,
              double eps, const std::string& out_path, double tol, int max_iters) {
  const HermitianMatrix sample_cov = load_hermitian(rhat_path);
  const HermitianMatrix signal_cov = load_hermitian(rshat_path);
  if (sample_cov.dim() != signal_cov.dim()) {
    std::cerr << "error: matrix dimensions differ (" << sample_cov.dim() << " vs "
              << signal_cov.dim() << ")\n";
    return kExitInputError;
  }
  const UncertaintyModel u(gamma, eps);
  SolverOptions opts;
  opts.feas_tol = tol;
  opts.gap_tol = tol;
  opts.max_iterations = max_iters;

  const HermitianMatrix loaded =
      sample_cov + gamma * HermitianMatrix::Identity(sample_cov.dim());
  const RelaxationProblem prob(signal_cov, loaded, eps);
  const ConicSolution sol = solve_relaxation(prob, opts);
  const auto [w, diag] = algorithm1(sample_cov, signal_cov, u, opts);

  char buf[160];
  std::cout << "dim: " << sample_cov.dim() << "\n";
  std::snprintf(buf, sizeof(buf), "gamma: %.10g  eps: %.10g\n", gamma, eps);
  std::cout << buf;
  std::snprintf(buf, sizeof(buf), "relaxation value: %.10g\n", diag.relaxation_value);
  std::cout << buf;
  std::snprintf(buf, sizeof(buf), "achieved value:   %.10g\n", diag.achieved_value);
  std::cout << buf;
  std::cout << "rank of W: " << diag.rank_of_w << "\n";
  std::cout << "branches: " << diag.per_branch_values.size()
            << "  selected: " << diag.selected_index << "\n";
  std::cout << "solver status: "
            << (diag.solver_status == SolveStatus::Optimal ? "optimal" : "degraded") << " ("
            << diag.solver_iterations << " iterations)\n";
  std::cout << "weights:\n";
  for (Eigen::Index i = 0; i < w.w.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  %2ld: %+.12g%+.12gj\n", long(i), w.w[i].real(),
                  w.w[i].imag());
    std::cout << buf;
  }
  print_kkt(sol.residuals, std::cout);
  print_certificates(diag.certificate, std::cout);

  if (!out_path.empty()) {
    json doc;
    doc["dim"] = sample_cov.dim();
    doc["gamma"] = gamma;
    doc["eps"] = eps;
    doc["sample_cov"] = matrix_to_json(sample_cov);
    doc["signal_cov"] = matrix_to_json(signal_cov);
    doc["W"] = matrix_to_json(sol.W);
    doc["Y"] = matrix_to_json(sol.Y);
    doc["t"] = sol.t;
    doc["z"] = sol.z;
    doc["Z"] = matrix_to_json(sol.Z);
    doc["primal_value"] = sol.primal_value;
    doc["dual_value"] = sol.dual_value;
    doc["achieved_value"] = diag.achieved_value;
    doc["weights"] = vector_to_json(w.w);
    std::ofstream f(out_path);
    if (!f) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitInputError;
    }
    f << doc.dump(2) << "\n";
    std::cout << "solution written to " << out_path << "\n";
  }
  return 0;
}

int run_experiment_cmd(const std::string& config_path, std::uint64_t seed_override,
                       bool has_seed, int trials_override, bool full_scale,
                       const std::string& out_path, bool timing, const std::string& log_path) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (has_seed) cfg.base_seed = seed_override;
  if (trials_override > 0) cfg.trials = trials_override;
  if (full_scale) cfg.trials = cfg.full_trials;

  std::ofstream log_file;
  ExperimentOptions exo;
  exo.timing = timing;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) {
      std::cerr << "error: cannot write " << log_path << "\n";
      return kExitInputError;
    }
    exo.log = &log_file;
  }

  if (out_path.empty()) {
    run_experiment(cfg, std::cout, exo);
  } else {
    std::ofstream f(out_path);
    if (!f) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitInputError;
    }
    run_experiment(cfg, f, exo);
  }
  return 0;
}

int run_certify(const std::string& solution_path, double tol) {
  std::ifstream f(solution_path);
  if (!f) {
    std::cerr << "error: cannot open " << solution_path << "\n";
    return kExitInputError;
  }
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    std::cerr << "error: bad solution file: " << e.what() << "\n";
    return kExitInputError;
  }

  const HermitianMatrix sample_cov = matrix_from_json(doc.at("sample_cov"));
  const HermitianMatrix signal_cov = matrix_from_json(doc.at("signal_cov"));
  const double gamma = doc.at("gamma").get<double>();
  const double eps = doc.at("eps").get<double>();
  const HermitianMatrix loaded =
      sample_cov + gamma * HermitianMatrix::Identity(sample_cov.dim());
  const RelaxationProblem prob(signal_cov, loaded, eps);

  ConicSolution sol{matrix_from_json(doc.at("W")), matrix_from_json(doc.at("Y")),
                    doc.at("t").get<double>(), doc.at("z").get<double>(),
                    matrix_from_json(doc.at("Z"))};
  sol.primal_value = doc.at("primal_value").get<double>();
  sol.dual_value = doc.at("dual_value").get<double>();
  const KktReport r = check_kkt(sol, prob);
  print_kkt(r, std::cout);

  const CertificateReport rep = check_certificates(sol.W, sol.Y, sol.primal_value, signal_cov,
                                                   sample_cov, UncertaintyModel(gamma, eps));
  print_certificates(rep, std::cout);

  const double scale = std::max(1.0, std::abs(sol.primal_value));
  const bool pass = r.max_comp() <= tol * scale && r.r_primal <= tol * scale &&
                    r.r_dual <= tol * scale && r.r_gap <= tol;
  std::cout << (pass ? "CERTIFY PASS" : "CERTIFY FAIL") << " (tolerance " << tol << ")\n";
  return pass ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust general-rank beamforming via conic relaxation"};
  app.require_subcommand(1);

  std::string rhat_path, rshat_path, out_path, config_path, log_path, solution_path;
  double gamma = 0.0, eps = 0.0, tol = 1e-8, certify_tol = 1e-6;
  int max_iters = 200, trials_override = 0;
  std::uint64_t seed_override = 0;
  bool full_scale = false, timing = false;

  CLI::App* solve = app.add_subcommand("solve", "solve one robust beamforming instance");
  solve->add_option("--rhat", rhat_path, "sample covariance matrix file")->required();
  solve->add_option("--rshat", rshat_path, "presumed signal covariance matrix file")
      ->required();
  solve->add_option("--gamma", gamma, "diagonal loading radius")->required();
  solve->add_option("--eps", eps, "signal covariance uncertainty radius")->required();
  solve->add_option("--out", out_path, "write the solution as JSON");
  solve->add_option("--tol", tol, "solver feasibility/gap tolerance");
  solve->add_option("--max-iters", max_iters, "iteration cap");

  CLI::App* experiment = app.add_subcommand("experiment", "run a configured sweep");
  experiment->add_option("--config", config_path, "experiment config file")->required();
  CLI::Option* seed_opt =
      experiment->add_option("--seed", seed_override, "override the base seed");
  experiment->add_option("--trials", trials_override, "override the trial count");
  experiment->add_flag("--full-scale", full_scale, "use the full_trials trial count");
  experiment->add_option("--out", out_path, "CSV output path (default stdout)");
  experiment->add_flag("--timing", timing, "append a wall_time_ms column");
  experiment->add_option("--log", log_path, "per-solve text log");

  CLI::App* certify = app.add_subcommand("certify", "re-check a stored solution");
  certify->add_option("--solution", solution_path, "solution JSON from solve --out")
      ->required();
  certify->add_option("--tol", certify_tol, "acceptance tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return run_solve(rhat_path, rshat_path, gamma, eps, out_path, tol, max_iters);
    if (experiment->parsed())
      return run_experiment_cmd(config_path, seed_override, seed_opt->count() > 0,
                                trials_override, full_scale, out_path, timing, log_path);
    if (certify->parsed()) return run_certify(solution_path, certify_tol);
  } catch (const solver_error& e) {
    std::cerr << "solver failure: " << e.what() << " (primal residual " << e.best.r_primal
              << ", dual residual " << e.best.r_dual << ", relative gap " << e.best.rel_gap
              << ")\n";
    return kExitSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return 0;
}
