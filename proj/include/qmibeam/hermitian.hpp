// SPDX-License-Identifier: Apache-2.0
//
// Dense complex-Hermitian linear algebra: the numeric substrate for the
// whole library. Everything here is value-semantic and deterministic --
// the eigensolver is a cyclic Jacobi sweep with a fixed pivot order, so
// identical inputs produce bitwise-identical outputs.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace qmibeam {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Default relative tolerance for positive-semidefiniteness tests.
inline constexpr double kPsdTol = 1e-9;

/// Largest tolerated relative asymmetry of a matrix passed to the
/// HermitianMatrix constructor. Anything worse indicates a caller bug.
inline constexpr double kAsymmetryTol = 1e-8;

namespace detail {

inline double conj_s(double x) { return x; }
inline Complex conj_s(const Complex& x) { return std::conj(x); }
inline double real_s(double x) { return x; }
inline double real_s(const Complex& x) { return x.real(); }

// Cyclic Jacobi eigensolver for self-adjoint matrices, templated on the
// scalar so the same kernel serves the complex Hermitian eigensolver and
// the real symmetric blocks inside the conic solver. Pivots run in fixed
// row-major order; each rotation annihilates a(p,q) exactly.
template <typename Scalar>
void jacobi_eig_in_place(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                         Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& vecs) {
  const Eigen::Index n = a.rows();
  vecs.setIdentity(n, n);
  if (n == 1) return;

  const double fnorm = a.norm();
  const double off_target = 5e-15 * std::max(1.0, fnorm);
  const int max_sweeps = 40;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p + 1 < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * std::norm(a(p, q));
    if (std::sqrt(off) <= off_target) break;

    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar m = a(p, q);
        const double am = std::abs(m);
        if (am <= 1e-300) continue;

        const Scalar phase = m / am;  // e^{i arg m}; +-1 in the real case
        const double app = real_s(a(p, p));
        const double aqq = real_s(a(q, q));
        const double tau = (aqq - app) / (2.0 * am);
        // smaller-magnitude root of t^2 - 2*tau*t - 1 = 0
        const double t = (tau > 0.0) ? -1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                     : 1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const Scalar sigma = phase * Scalar(t * c);

        // A <- U^H A U with U = [[c, -sigma],[conj(sigma), c]] on (p,q)
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = Scalar(c) * akp + conj_s(sigma) * akq;
          a(k, q) = -sigma * akp + Scalar(c) * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = Scalar(c) * apk + sigma * aqk;
          a(q, k) = -conj_s(sigma) * apk + Scalar(c) * aqk;
        }
        a(p, q) = Scalar(0);
        a(q, p) = Scalar(0);
        a(p, p) = Scalar(real_s(a(p, p)));
        a(q, q) = Scalar(real_s(a(q, q)));

        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = vecs(k, p);
          const Scalar vkq = vecs(k, q);
          vecs(k, p) = Scalar(c) * vkp + conj_s(sigma) * vkq;
          vecs(k, q) = -sigma * vkp + Scalar(c) * vkq;
        }
      }
    }
  }
}

// Descending sort of (value, vector) pairs, ties broken by original index.
template <typename MatType>
void sort_eigen_descending(RVector& values, MatType& vectors) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return values[i] > values[j]; });
  RVector sv(n);
  MatType svec(vectors.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    sv[k] = values[idx[static_cast<size_t>(k)]];
    svec.col(k) = vectors.col(idx[static_cast<size_t>(k)]);
  }
  values.swap(sv);
  vectors.swap(svec);
}

}  // namespace detail

/// Dense N x N complex Hermitian matrix. The constructor symmetrizes
/// M <- (M + M^H)/2 and rejects inputs whose asymmetry exceeds
/// kAsymmetryTol relative to max(1, ||M||).
class HermitianMatrix {
 public:
  explicit HermitianMatrix(const CMatrix& m) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw std::invalid_argument("HermitianMatrix: matrix must be square with dim >= 1");
    if (!m.allFinite()) throw std::invalid_argument("HermitianMatrix: non-finite entries");
    const double asym = (m - m.adjoint()).norm();
    if (asym > kAsymmetryTol * std::max(1.0, m.norm()))
      throw std::invalid_argument("HermitianMatrix: input is not Hermitian");
    m_ = 0.5 * (m + m.adjoint().eval());
  }

  static HermitianMatrix Identity(Eigen::Index n) {
    return HermitianMatrix(Trusted{}, CMatrix::Identity(n, n));
  }
  static HermitianMatrix Zero(Eigen::Index n) {
    return HermitianMatrix(Trusted{}, CMatrix::Zero(n, n));
  }
  static HermitianMatrix Diagonal(const RVector& d) {
    return HermitianMatrix(Trusted{}, d.cast<Complex>().asDiagonal().toDenseMatrix());
  }
  /// w w^H for a complex vector w.
  static HermitianMatrix FromOuter(const CVector& w) {
    return HermitianMatrix(Trusted{}, CMatrix(w * w.adjoint()));
  }
  /// Symmetrizes without the asymmetry check; for internal results that
  /// are Hermitian by construction up to roundoff.
  static HermitianMatrix Symmetrized(const CMatrix& m) {
    return HermitianMatrix(Trusted{}, CMatrix(0.5 * (m + m.adjoint().eval())));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const CMatrix& mat() const { return m_; }

  double trace() const { return m_.trace().real(); }

  HermitianMatrix operator+(const HermitianMatrix& o) const {
    return HermitianMatrix(Trusted{}, CMatrix(m_ + o.m_));
  }
  HermitianMatrix operator-(const HermitianMatrix& o) const {
    return HermitianMatrix(Trusted{}, CMatrix(m_ - o.m_));
  }
  friend HermitianMatrix operator*(double a, const HermitianMatrix& m) {
    return HermitianMatrix(Trusted{}, CMatrix(a * m.m_));
  }

 private:
  struct Trusted {};
  HermitianMatrix(Trusted, CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

/// Eigenvalues in descending order with orthonormal eigenvectors (columns).
struct EigenPair {
  RVector values;
  CMatrix vectors;
};

/// Full eigendecomposition of a Hermitian matrix via cyclic Jacobi.
/// Deterministic: fixed sweep order, descending sort with index
/// tie-breaking, and each eigenvector phase-normalized so its first
/// above-threshold entry is real nonnegative.
inline EigenPair eig_hermitian(const HermitianMatrix& m) {
  CMatrix a = m.mat();
  CMatrix vecs;
  detail::jacobi_eig_in_place<Complex>(a, vecs);
  RVector values = a.diagonal().real();
  detail::sort_eigen_descending(values, vecs);
  for (Eigen::Index k = 0; k < vecs.cols(); ++k) {
    for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
      const double ai = std::abs(vecs(i, k));
      if (ai > 1e-12) {
        vecs.col(k) *= std::conj(vecs(i, k)) / ai;
        break;
      }
    }
  }
  return EigenPair{std::move(values), std::move(vecs)};
}

/// Frobenius norm.
inline double frob_norm(const HermitianMatrix& m) { return m.mat().norm(); }

/// True iff lambda_min(M) >= -tol * max(1, spectral radius of M).
inline bool is_psd(const HermitianMatrix& m, double tol = kPsdTol) {
  if (tol < 0.0) throw std::invalid_argument("is_psd: tol must be nonnegative");
  const EigenPair ep = eig_hermitian(m);
  const double lo = ep.values[ep.values.size() - 1];
  const double radius = std::max(std::abs(ep.values[0]), std::abs(lo));
  return lo >= -tol * std::max(1.0, radius);
}

/// PSD square root: R with R*R = M. Eigenvalues within the PSD tolerance
/// of zero are clamped to zero; a genuinely indefinite M is rejected.
inline HermitianMatrix sqrt_psd(const HermitianMatrix& m) {
  const EigenPair ep = eig_hermitian(m);
  const double top = std::max(ep.values[0], 0.0);
  const double floor = -kPsdTol * std::max(1.0, top);
  RVector s(ep.values.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (ep.values[i] < floor) throw std::domain_error("sqrt_psd: matrix is not PSD");
    s[i] = std::sqrt(std::max(ep.values[i], 0.0));
  }
  return HermitianMatrix::Symmetrized(ep.vectors * s.cast<Complex>().asDiagonal() *
                                      ep.vectors.adjoint());
}

/// Re tr(A B) for Hermitian A, B (the trace is real in exact arithmetic).
inline double trace_product(const HermitianMatrix& a, const HermitianMatrix& b) {
  return a.mat().cwiseProduct(b.mat().conjugate()).sum().real();
}

/// w^H M w, real for Hermitian M.
inline double quadratic_form(const CVector& w, const HermitianMatrix& m) {
  return (w.adjoint() * m.mat() * w)(0, 0).real();
}

}  // namespace qmibeam
