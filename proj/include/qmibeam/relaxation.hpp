// SPDX-License-Identifier: Apache-2.0
//
// The three conic programs at the core of the robust beamformer:
//
//   solve_relaxation --  maximize tr(Rs Y) - eps*t  over (W, Y, t) with
//                        tr(A W) = 1, W - Y >= 0, W >= 0, ||Y|| <= t,
//                        A positive definite. The dual minimizes z over
//                        ||Z - Rs|| <= eps, z A - Z >= 0, Z >= 0; strong
//                        duality holds and the solver returns both sides.
//
//   solve_inner      --  same objective with W fixed and only the
//                        constraint Wfixed - Y >= 0 (the per-branch
//                        subproblem of the approximation algorithm).
//
//   check_kkt        --  complementarity residuals of the primal/dual
//                        pair, including the compact four-way chain
//                        z = tr(WZ) = tr(YZ) = tr(Y Rs) - eps||Y||.
//
// Variables are grouped as (W, S, t, u) with S = W - Y the PSD slack and
// (t, u) a second-order block on the vectorized Y, so the norm epigraph
// stays an N^2+1 cone instead of an (N^2+1)-sized LMI.

#pragma once

#include <optional>

#include "qmibeam/conic.hpp"

namespace qmibeam {

struct RelaxationProblem {
  HermitianMatrix signal_cov;   // presumed signal covariance
  HermitianMatrix denominator;  // sample covariance plus diagonal loading
  double eps;

  RelaxationProblem(HermitianMatrix signal_cov_in, HermitianMatrix denominator_in,
                    double eps_in)
      : signal_cov(std::move(signal_cov_in)),
        denominator(std::move(denominator_in)),
        eps(eps_in) {
    if (signal_cov.dim() != denominator.dim())
      throw std::invalid_argument("RelaxationProblem: dimension mismatch");
    if (!(eps > 0.0)) throw std::invalid_argument("RelaxationProblem: eps must be positive");
    if (!is_psd(signal_cov))
      throw std::invalid_argument("RelaxationProblem: signal covariance must be PSD");
    const EigenPair ed = eig_hermitian(denominator);
    if (ed.values[ed.values.size() - 1] <= 0.0)
      throw std::invalid_argument("RelaxationProblem: denominator matrix must be positive definite");
  }

  Eigen::Index dim() const { return signal_cov.dim(); }
};

struct KktReport {
  double r_comp1 = 0.0;    // |eps*t + tr(Y (Z - Rs))|
  double r_comp2 = 0.0;    // |tr((z A - Z) W)|
  double r_comp3 = 0.0;    // |tr((W - Y) Z)|
  double r_compact = 0.0;  // max pairwise gap in the four-way chain
  double r_primal = 0.0;
  double r_dual = 0.0;
  double r_gap = 0.0;

  double max_comp() const {
    return std::max({r_comp1, r_comp2, r_comp3, r_compact});
  }
};

struct ConicSolution {
  HermitianMatrix W;
  HermitianMatrix Y;
  double t = 0.0;
  double z = 0.0;
  HermitianMatrix Z;
  double primal_value = 0.0;
  double dual_value = 0.0;
  KktReport residuals;
  SolveStatus status = SolveStatus::Failed;
  int iterations = 0;
  std::vector<IterationRecord> trace;  // objective values in max form
};

struct InnerSolution {
  HermitianMatrix Y;
  double value = 0.0;       // tr(Rs Y) - eps ||Y||
  HermitianMatrix Z;        // dual certificate: Z >= 0, ||Z - Rs|| <= eps
  double dual_value = 0.0;  // tr(Wfixed Z)
  SolveStatus status = SolveStatus::Failed;
  int iterations = 0;
};

namespace detail {

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

inline double lambda_min(const HermitianMatrix& m) {
  const EigenPair ep = eig_hermitian(m);
  return ep.values[ep.values.size() - 1];
}

}  // namespace detail

inline KktReport check_kkt(const ConicSolution& sol, const RelaxationProblem& prob) {
  using detail::relu;
  const HermitianMatrix& rs = prob.signal_cov;
  const HermitianMatrix& a = prob.denominator;
  KktReport r;
  r.r_comp1 = std::abs(prob.eps * sol.t + trace_product(sol.Y, sol.Z - rs));
  r.r_comp2 = std::abs(trace_product(sol.z * a - sol.Z, sol.W));
  r.r_comp3 = std::abs(trace_product(sol.W - sol.Y, sol.Z));
  const double chain[4] = {sol.z, trace_product(sol.W, sol.Z), trace_product(sol.Y, sol.Z),
                           trace_product(sol.Y, rs) - prob.eps * frob_norm(sol.Y)};
  for (int i = 0; i < 4; ++i)
    for (int k = i + 1; k < 4; ++k)
      r.r_compact = std::max(r.r_compact, std::abs(chain[i] - chain[k]));
  r.r_primal = std::max({std::abs(trace_product(a, sol.W) - 1.0),
                         relu(-detail::lambda_min(sol.W)),
                         relu(-detail::lambda_min(sol.W - sol.Y)),
                         relu(frob_norm(sol.Y) - sol.t)});
  r.r_dual = std::max({relu(frob_norm(sol.Z - rs) - prob.eps),
                       relu(-detail::lambda_min(sol.z * a - sol.Z)),
                       relu(-detail::lambda_min(sol.Z))});
  r.r_gap = std::abs(sol.primal_value - sol.dual_value) /
            std::max({1.0, std::abs(sol.primal_value), std::abs(sol.dual_value)});
  return r;
}

inline ConicSolution solve_relaxation(const RelaxationProblem& prob,
                                      const SolverOptions& opts = {}) {
  const Eigen::Index n = prob.dim();
  const Eigen::Index nsq = n * n;
  const Eigen::Index oW = 0, oS = nsq, oT = 2 * nsq, oU = 2 * nsq + 1;
  const Eigen::Index nx = 3 * nsq + 1;
  const Eigen::Index m = nsq + 1;

  ConicProgram pr;
  pr.cones = {{ConeBlock::Kind::Psd, n},
              {ConeBlock::Kind::Psd, n},
              {ConeBlock::Kind::Soc, nsq + 1}};

  // minimize eps*t - tr(Rs u)
  pr.c = RVector::Zero(nx);
  pr.c[oT] = prob.eps;
  pr.c.segment(oU, nsq) = -svec(prob.signal_cov.mat());

  pr.A = RMatrix::Zero(m, nx);
  pr.b = RVector::Zero(m);
  pr.A.row(0).segment(oW, nsq) = svec(prob.denominator.mat()).transpose();
  pr.b[0] = 1.0;
  for (Eigen::Index k = 0; k < nsq; ++k) {
    pr.A(1 + k, oW + k) = 1.0;
    pr.A(1 + k, oS + k) = -1.0;
    pr.A(1 + k, oU + k) = -1.0;
  }

  // strictly feasible start: W = S = I/tr(A), Y = 0, t = 1 on the primal;
  // Z = Rs + eps*I/sqrt(N+1) with z large enough on the dual
  pr.x0 = RVector::Zero(nx);
  const RVector id_svec = svec(CMatrix::Identity(n, n));
  const double tr_a = prob.denominator.trace();
  pr.x0.segment(oW, nsq) = id_svec / tr_a;
  pr.x0.segment(oS, nsq) = id_svec / tr_a;
  pr.x0[oT] = 1.0;

  const HermitianMatrix z_init =
      prob.signal_cov + (prob.eps / std::sqrt(double(n + 1))) * HermitianMatrix::Identity(n);
  const EigenPair ez = eig_hermitian(z_init);
  const EigenPair ea = eig_hermitian(prob.denominator);
  const double z_scale = 2.0 * ez.values[0] / ea.values[n - 1] + 1.0;
  pr.y0 = RVector::Zero(m);
  pr.y0[0] = -z_scale;
  pr.y0.segment(1, nsq) = svec(z_init.mat());
  pr.s0 = pr.c - pr.A.transpose() * pr.y0;

  ConicResult res = pr.solve(opts);
  if (res.status == SolveStatus::Failed)
    throw solver_error("relaxation solve did not converge", std::move(res));

  ConicSolution sol{
      HermitianMatrix::Symmetrized(smat(res.x.segment(oW, nsq), n)),
      HermitianMatrix::Symmetrized(smat(res.x.segment(oU, nsq), n)),
      res.x[oT],
      -res.y[0],
      HermitianMatrix::Symmetrized(smat(res.y.segment(1, nsq), n)),
  };
  sol.primal_value = trace_product(prob.signal_cov, sol.Y) - prob.eps * sol.t;
  sol.dual_value = sol.z;
  sol.status = res.status;
  sol.iterations = res.iterations;
  sol.trace = std::move(res.trace);
  for (auto& rec : sol.trace) {  // convert to max form
    rec.primal_obj = -rec.primal_obj;
    rec.dual_obj = -rec.dual_obj;
  }
  sol.residuals = check_kkt(sol, prob);
  return sol;
}

inline InnerSolution solve_inner(const HermitianMatrix& w_fixed, const HermitianMatrix& rs,
                                 double eps, const SolverOptions& opts = {}) {
  if (w_fixed.dim() != rs.dim()) throw std::invalid_argument("solve_inner: dimension mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("solve_inner: eps must be positive");
  if (!is_psd(w_fixed, 1e-7)) throw std::invalid_argument("solve_inner: W must be PSD");
  if (!is_psd(rs)) throw std::invalid_argument("solve_inner: signal covariance must be PSD");

  const Eigen::Index n = rs.dim();
  const Eigen::Index nsq = n * n;
  const Eigen::Index oS = 0, oT = nsq, oU = nsq + 1;
  const Eigen::Index nx = 2 * nsq + 1;

  ConicProgram pr;
  pr.cones = {{ConeBlock::Kind::Psd, n}, {ConeBlock::Kind::Soc, nsq + 1}};
  pr.c = RVector::Zero(nx);
  pr.c[oT] = eps;
  pr.c.segment(oU, nsq) = -svec(rs.mat());
  pr.A = RMatrix::Zero(nsq, nx);
  for (Eigen::Index k = 0; k < nsq; ++k) {
    pr.A(k, oS + k) = 1.0;
    pr.A(k, oU + k) = 1.0;
  }
  pr.b = svec(w_fixed.mat());

  const EigenPair ew = eig_hermitian(w_fixed);
  const double shift = 0.5 * (std::max(ew.values[0], 0.0) + 1.0);
  pr.x0 = RVector::Zero(nx);
  pr.x0.segment(oS, nsq) = svec(CMatrix::Identity(n, n)) * shift;
  pr.x0.segment(oU, nsq) = pr.b - pr.x0.segment(oS, nsq);
  pr.x0[oT] = pr.x0.segment(oU, nsq).norm() + 1.0;

  const HermitianMatrix z_init =
      rs + (eps / (2.0 * std::sqrt(double(n)))) * HermitianMatrix::Identity(n);
  pr.y0 = -svec(z_init.mat());
  pr.s0 = pr.c - pr.A.transpose() * pr.y0;

  ConicResult res = pr.solve(opts);
  if (res.status == SolveStatus::Failed)
    throw solver_error("inner solve did not converge", std::move(res));

  InnerSolution sol{HermitianMatrix::Symmetrized(smat(res.x.segment(oU, nsq), n)),
                    0.0,
                    HermitianMatrix::Symmetrized(smat(-res.y, n)),
                    0.0};
  sol.value = trace_product(rs, sol.Y) - eps * frob_norm(sol.Y);
  sol.dual_value = trace_product(w_fixed, sol.Z);
  sol.status = res.status;
  sol.iterations = res.iterations;
  return sol;
}

}  // namespace qmibeam
