// SPDX-License-Identifier: Apache-2.0
//
// Two-matrix rank-one decomposition: given PSD X of rank R and Hermitian
// A, B, produce vectors x_1..x_R with sum x_r x_r^H = X and every
// x_r^H A x_r = tr(AX)/R, x_r^H B x_r = tr(BX)/R.
//
// The construction starts from scaled eigenvectors and runs two passes of
// pair rotations [y_i', y_j'] = [y_i, y_j] U with unitary
// U = [[cos t, -sin t e^{-i phi}],[sin t e^{i phi}, cos t]]:
// the first pass drives the A-forms to their common target, the second
// drives the B-forms there while picking the rotation phase so that
// Re(e^{i phi} y_i^H A y_j) = 0, which leaves both A-forms untouched.
// Each rotation pins one vector, so at most 2(R-1) updates are needed;
// a straddling pair always exists because the mean of the remaining forms
// stays on target. Targets are computed from the rank-R truncation of X,
// so the reconstruction guarantee is relative to that truncation (for
// inputs of exact numeric rank the two coincide up to roundoff).

#pragma once

#include <vector>

#include "qmibeam/hermitian.hpp"

namespace qmibeam {

/// Relative eigenvalue threshold used when the caller does not specify one.
inline constexpr double kRankRelTol = 1e-6;

/// Count of eigenvalues above rel_tol * lambda_max(X); 0 for X = 0.
inline Eigen::Index numeric_rank(const HermitianMatrix& x, double rel_tol = kRankRelTol) {
  const EigenPair ep = eig_hermitian(x);
  const double top = ep.values[0];
  if (top < -kPsdTol * std::max(1.0, std::abs(ep.values[ep.values.size() - 1])))
    throw std::domain_error("numeric_rank: matrix is not PSD");
  if (ep.values[ep.values.size() - 1] <
      -kPsdTol * std::max(1.0, std::abs(top)))
    throw std::domain_error("numeric_rank: matrix is not PSD");
  if (top <= 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < ep.values.size(); ++i)
    if (ep.values[i] > rel_tol * top) ++r;
  return r;
}

struct DecompositionResult {
  std::vector<CVector> vectors;
  Eigen::Index rank = 0;
  double recon_error = 0.0;  // ||sum x x^H - X|| / max(1, ||X||)
  double a_form_error = 0.0; // max relative deviation from tr(AX)/R
  double b_form_error = 0.0;
};

struct decomposition_error : std::runtime_error {
  decomposition_error(const std::string& msg, double recon, double a_dev, double b_dev)
      : std::runtime_error(msg), recon_error(recon), a_form_error(a_dev), b_form_error(b_dev) {}
  double recon_error, a_form_error, b_form_error;
};

namespace detail {

struct PairRotation {
  double tau;
  double phi;
};

// Real roots of (fjj - target) tau^2 + 2 lin tau + (fii - target) = 0 for a
// straddling pair; the discriminant is clamped at zero against roundoff.
inline std::vector<double> straddle_roots(double fii, double fjj, double lin, double target) {
  const double a = fjj - target;
  const double c = fii - target;
  const double b = 2.0 * lin;
  std::vector<double> roots;
  if (std::abs(a) <= 1e-14 * (std::abs(fjj) + std::abs(target) + 1.0)) {
    if (std::abs(b) > 1e-300) roots.push_back(-c / b);
    else roots.push_back(0.0);
    return roots;
  }
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  const double sq = std::sqrt(disc);
  if (b == 0.0) {
    const double r = std::sqrt(std::max(0.0, -c / a));
    roots.push_back(r);
    roots.push_back(-r);
  } else {
    const double q = -0.5 * (b + (b > 0.0 ? sq : -sq));
    roots.push_back(q / a);
    if (q != 0.0) roots.push_back(c / q);
  }
  return roots;
}

inline void apply_pair_rotation(CMatrix& y, Eigen::Index i, Eigen::Index j, double tau,
                                double phi) {
  const double c = 1.0 / std::sqrt(1.0 + tau * tau);
  const double s = tau * c;
  const Complex ph = std::polar(1.0, phi);
  const CVector yi = y.col(i);
  const CVector yj = y.col(j);
  y.col(i) = c * yi + s * ph * yj;
  y.col(j) = -s * std::conj(ph) * yi + c * yj;
}

inline void canonicalize_phase(CVector& v) {
  const double scale = v.norm();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > 1e-12 * std::max(1.0, scale)) {
      v *= std::conj(v[i]) / a;
      break;
    }
  }
}

}  // namespace detail

inline DecompositionResult rank_one_decompose(const HermitianMatrix& x,
                                              const HermitianMatrix& a,
                                              const HermitianMatrix& b, double tol = 1e-8) {
  const Eigen::Index n = x.dim();
  if (a.dim() != n || b.dim() != n)
    throw std::invalid_argument("rank_one_decompose: dimension mismatch");
  const Eigen::Index rank = numeric_rank(x);
  if (rank < 1) throw std::invalid_argument("rank_one_decompose: X must have rank >= 1");

  const EigenPair ep = eig_hermitian(x);
  CMatrix y(n, rank);
  for (Eigen::Index k = 0; k < rank; ++k)
    y.col(k) = std::sqrt(std::max(ep.values[k], 0.0)) * ep.vectors.col(k);

  const auto form = [](const CMatrix& m, const CVector& u, const CVector& v) {
    return (u.adjoint() * m * v)(0, 0);
  };

  double target_a = 0.0, target_b = 0.0;
  for (Eigen::Index k = 0; k < rank; ++k) {
    target_a += form(a.mat(), y.col(k), y.col(k)).real();
    target_b += form(b.mat(), y.col(k), y.col(k)).real();
  }
  target_a /= double(rank);
  target_b /= double(rank);

  const double scale_a = std::max(1.0, std::abs(target_a));
  const double scale_b = std::max(1.0, std::abs(target_b));
  const Eigen::Index update_cap = 4 * rank;
  Eigen::Index updates = 0;

  // pass 1: drive all A-forms to target_a
  {
    std::vector<Eigen::Index> active(static_cast<size_t>(rank));
    for (Eigen::Index k = 0; k < rank; ++k) active[static_cast<size_t>(k)] = k;
    while (active.size() >= 2 && updates <= update_cap) {
      Eigen::Index imin = active[0], imax = active[0];
      double fmin = 0.0, fmax = 0.0;
      bool first = true;
      for (Eigen::Index k : active) {
        const double f = form(a.mat(), y.col(k), y.col(k)).real();
        if (first || f < fmin) { fmin = f; imin = k; }
        if (first || f > fmax) { fmax = f; imax = k; }
        first = false;
      }
      if (fmax - fmin <= 1e-13 * scale_a) break;
      const Complex aij = form(a.mat(), y.col(imin), y.col(imax));
      const double phi = (std::abs(aij) > 1e-300) ? -std::arg(aij) : 0.0;
      const double lin = std::abs(aij);
      const auto roots = detail::straddle_roots(fmin, fmax, lin, target_a);
      double tau = roots[0];
      for (double r : roots)
        if (std::abs(r) < std::abs(tau)) tau = r;
      detail::apply_pair_rotation(y, imin, imax, tau, phi);
      ++updates;
      active.erase(std::find(active.begin(), active.end(), imin));
    }
  }

  // pass 2: drive the B-forms to target_b without disturbing the A-forms
  {
    std::vector<Eigen::Index> active(static_cast<size_t>(rank));
    for (Eigen::Index k = 0; k < rank; ++k) active[static_cast<size_t>(k)] = k;
    while (active.size() >= 2 && updates <= update_cap) {
      Eigen::Index imin = active[0], imax = active[0];
      double fmin = 0.0, fmax = 0.0;
      bool first = true;
      for (Eigen::Index k : active) {
        const double f = form(b.mat(), y.col(k), y.col(k)).real();
        if (first || f < fmin) { fmin = f; imin = k; }
        if (first || f > fmax) { fmax = f; imax = k; }
        first = false;
      }
      if (fmax - fmin <= 1e-13 * scale_b) break;
      const Complex aij = form(a.mat(), y.col(imin), y.col(imax));
      const Complex bij = form(b.mat(), y.col(imin), y.col(imax));
      std::vector<double> phis;
      if (std::abs(aij) > 1e-12 * scale_a) {
        phis.push_back(0.5 * M_PI - std::arg(aij));
        phis.push_back(-0.5 * M_PI - std::arg(aij));
      } else {
        phis.push_back((std::abs(bij) > 1e-300) ? -std::arg(bij) : 0.0);
      }
      bool have = false;
      detail::PairRotation bestrot{0.0, 0.0};
      for (double phi : phis) {
        const double lin = (std::polar(1.0, phi) * bij).real();
        for (double r : detail::straddle_roots(fmin, fmax, lin, target_b)) {
          double pn = std::remainder(phi, 2.0 * M_PI);
          if (!have || std::abs(r) < std::abs(bestrot.tau) - 1e-15 ||
              (std::abs(std::abs(r) - std::abs(bestrot.tau)) <= 1e-15 &&
               std::abs(pn) < std::abs(std::remainder(bestrot.phi, 2.0 * M_PI)))) {
            bestrot = {r, phi};
            have = true;
          }
        }
      }
      detail::apply_pair_rotation(y, imin, imax, bestrot.tau, bestrot.phi);
      ++updates;
      active.erase(std::find(active.begin(), active.end(), imin));
    }
  }

  DecompositionResult result;
  result.rank = rank;
  result.vectors.reserve(static_cast<size_t>(rank));
  CMatrix recon = CMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < rank; ++k) {
    CVector v = y.col(k);
    detail::canonicalize_phase(v);
    recon += v * v.adjoint();
    result.a_form_error =
        std::max(result.a_form_error,
                 std::abs(form(a.mat(), v, v).real() - target_a) / scale_a);
    result.b_form_error =
        std::max(result.b_form_error,
                 std::abs(form(b.mat(), v, v).real() - target_b) / scale_b);
    result.vectors.push_back(std::move(v));
  }
  result.recon_error = (recon - x.mat()).norm() / std::max(1.0, x.mat().norm());

  // measure the procedure against the rank-truncated input it controls
  CMatrix xr = CMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < rank; ++k)
    xr += std::max(ep.values[k], 0.0) * (ep.vectors.col(k) * ep.vectors.col(k).adjoint());
  const double recon_vs_truncation = (recon - xr).norm() / std::max(1.0, xr.norm());

  if (updates > update_cap || recon_vs_truncation > tol ||
      result.a_form_error > tol || result.b_form_error > tol) {
    throw decomposition_error("rank_one_decompose: tolerance not reached",
                              result.recon_error, result.a_form_error, result.b_form_error);
  }
  return result;
}

}  // namespace qmibeam
