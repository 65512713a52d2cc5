// SPDX-License-Identifier: Apache-2.0
//
// Small dense primal-dual interior-point solver over a product of complex
// Hermitian PSD cones and second-order cones, in the standard form
//
//     minimize    c.x    subject to  A x = b,  x in K,
//
// with Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
// Hermitian blocks are carried in an isometric real parameterization
// ("svec": diagonal, then sqrt(2)*Re / sqrt(2)*Im of the upper triangle);
// the barrier/Newton machinery for those blocks runs on their 2n x 2n
// real symmetric embedding [[Re, -Im],[Im, Re]] and results are mapped
// back with the two redundant copies averaged. The embedding doubles
// eigenvalue multiplicities but not the barrier rank, which stays n per
// Hermitian block (2 per second-order block).
//
// The iteration schedule is fixed and free of randomization: identical
// inputs produce identical iterates.

#pragma once

#include <limits>
#include <vector>

#include "qmibeam/hermitian.hpp"

namespace qmibeam {

struct SolverOptions {
  int max_iterations = 200;
  double feas_tol = 1e-8;          // absolute tolerance on residual norms
  double gap_tol = 1e-8;           // relative duality gap
  double degraded_feas_tol = 1e-6; // accepted with a degraded flag
  double degraded_gap_tol = 1e-6;
  double step_fraction = 0.98;     // fraction-to-boundary
  double initial_centering = 0.1;  // sigma floor on the first iteration
  bool record_trace = false;
};

enum class SolveStatus { Optimal, Degraded, Failed };

struct IterationRecord {
  int iter;
  double mu;
  double primal_obj;  // min-form objective c.x
  double dual_obj;    // b.y
  double r_primal;
  double r_dual;
  double sigma;
  double alpha;
};

struct ConicResult {
  RVector x, y, s;
  SolveStatus status = SolveStatus::Failed;
  int iterations = 0;
  double primal_obj = 0.0, dual_obj = 0.0;
  double r_primal = 0.0, r_dual = 0.0, rel_gap = 0.0, mu = 0.0;
  std::vector<IterationRecord> trace;
};

/// Thrown when the solver cannot reach even degraded accuracy; carries the
/// best iterate and its residuals.
struct solver_error : std::runtime_error {
  solver_error(const std::string& msg, ConicResult best_result)
      : std::runtime_error(msg), best(std::move(best_result)) {}
  ConicResult best;
};

struct ConeBlock {
  enum class Kind { Psd, Soc };
  Kind kind;
  Eigen::Index n;  // Hermitian dimension, or full second-order cone length

  Eigen::Index vec_len() const { return kind == Kind::Psd ? n * n : n; }
  double barrier_rank() const { return kind == Kind::Psd ? double(n) : 2.0; }
};

// ---------------------------------------------------------------------------
// svec parameterization of Hermitian matrices
// ---------------------------------------------------------------------------

inline RVector svec(const CMatrix& m) {
  const Eigen::Index n = m.rows();
  RVector v(n * n);
  for (Eigen::Index p = 0; p < n; ++p) v[p] = m(p, p).real();
  Eigen::Index idx = n;
  const double s2 = std::sqrt(2.0);
  for (Eigen::Index p = 0; p + 1 < n; ++p) {
    for (Eigen::Index q = p + 1; q < n; ++q) {
      v[idx++] = s2 * m(p, q).real();
      v[idx++] = s2 * m(p, q).imag();
    }
  }
  return v;
}

inline CMatrix smat(const Eigen::Ref<const RVector>& v, Eigen::Index n) {
  CMatrix m(n, n);
  for (Eigen::Index p = 0; p < n; ++p) m(p, p) = Complex(v[p], 0.0);
  Eigen::Index idx = n;
  const double is2 = 1.0 / std::sqrt(2.0);
  for (Eigen::Index p = 0; p + 1 < n; ++p) {
    for (Eigen::Index q = p + 1; q < n; ++q) {
      const Complex z(v[idx] * is2, v[idx + 1] * is2);
      idx += 2;
      m(p, q) = z;
      m(q, p) = std::conj(z);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// real symmetric kernel on the 2n x 2n embedding
// ---------------------------------------------------------------------------

namespace detail {

struct ipm_breakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline RMatrix embed(const CMatrix& m) {
  const Eigen::Index n = m.rows();
  RMatrix e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = m.real();
  e.topRightCorner(n, n) = -m.imag();
  e.bottomLeftCorner(n, n) = m.imag();
  e.bottomRightCorner(n, n) = m.real();
  return e;
}

// Averages the two copies carried by the embedding.
inline CMatrix unembed(const RMatrix& e) {
  const Eigen::Index n = e.rows() / 2;
  const RMatrix re = 0.5 * (e.topLeftCorner(n, n) + e.bottomRightCorner(n, n));
  const RMatrix im = 0.5 * (e.bottomLeftCorner(n, n) - e.topRightCorner(n, n));
  CMatrix m = re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
  return 0.5 * (m + m.adjoint().eval());
}

struct SymEig {
  RMatrix q;
  RVector d;
};

inline SymEig sym_eig(const RMatrix& m) {
  RMatrix a = m;
  RMatrix q;
  jacobi_eig_in_place<double>(a, q);
  RVector d = a.diagonal();
  sort_eigen_descending(d, q);
  return {std::move(q), std::move(d)};
}

inline RMatrix sym_pow(const SymEig& eg, double expo) {
  RVector f(eg.d.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (eg.d[i] <= 0.0) throw ipm_breakdown("interior-point iterate left the cone");
    f[i] = std::pow(eg.d[i], expo);
  }
  return eg.q * f.asDiagonal() * eg.q.transpose();
}

// Per-iteration Nesterov-Todd scaling data for one Hermitian block.
struct PsdScaling {
  CMatrix w;              // scaling point, complex side
  RMatrix w_half;         // embedded w^{1/2}
  RMatrix w_ihalf;        // embedded w^{-1/2}
  SymEig lam_eig;         // eigensystem of the embedded scaled point
  RMatrix lam_ihalf;
};

inline PsdScaling psd_scaling(const CMatrix& x, const CMatrix& s) {
  const RMatrix xe = embed(x);
  const RMatrix se = embed(s);
  const SymEig ex = sym_eig(xe);
  const RMatrix x_half = sym_pow(ex, 0.5);
  const RMatrix t = x_half * se * x_half;
  const RMatrix t_ihalf = sym_pow(sym_eig(0.5 * (t + t.transpose())), -0.5);
  RMatrix we = x_half * t_ihalf * x_half;
  we = 0.5 * (we + we.transpose()).eval();

  PsdScaling sc;
  sc.w = unembed(we);
  const SymEig ew = sym_eig(we);
  sc.w_half = sym_pow(ew, 0.5);
  sc.w_ihalf = sym_pow(ew, -0.5);
  RMatrix lam = sc.w_ihalf * xe * sc.w_ihalf;
  lam = 0.5 * (lam + lam.transpose()).eval();
  sc.lam_eig = sym_eig(lam);
  sc.lam_ihalf = sym_pow(sc.lam_eig, -0.5);
  return sc;
}

// Largest step alpha with lam + alpha*d staying PSD, both embedded.
inline double psd_step_to_boundary(const PsdScaling& sc, const RMatrix& d_e) {
  RMatrix b = sc.lam_ihalf * d_e * sc.lam_ihalf;
  b = 0.5 * (b + b.transpose()).eval();
  const SymEig eb = sym_eig(b);
  const double lo = eb.d[eb.d.size() - 1];
  if (lo >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lo;
}

// Solves L_lambda(out) = rhs on the embedded side: out_ij = 2 rhs_ij/(d_i+d_j)
// in the eigenbasis of lambda.
inline RMatrix psd_lam_solve(const PsdScaling& sc, const RMatrix& rhs_e) {
  const RMatrix r = sc.lam_eig.q.transpose() * rhs_e * sc.lam_eig.q;
  RMatrix out(r.rows(), r.cols());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index k = 0; k < r.cols(); ++k) {
      const double den = sc.lam_eig.d[i] + sc.lam_eig.d[k];
      if (den <= 0.0) throw ipm_breakdown("singular scaled point");
      out(i, k) = 2.0 * r(i, k) / den;
    }
  }
  return out = sc.lam_eig.q * out * sc.lam_eig.q.transpose();
}

// Scaling operator U -> w U w as a dense matrix on svec coordinates,
// assembled column-by-column from outer products of the columns of w.
inline void psd_scaling_operator(const CMatrix& w, Eigen::Ref<RMatrix> h) {
  const Eigen::Index n = w.rows();
  const double is2 = 1.0 / std::sqrt(2.0);
  Eigen::Index col = 0;
  CMatrix m(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    m = w.col(k) * w.col(k).adjoint();
    h.col(col++) = svec(m);
  }
  for (Eigen::Index p = 0; p + 1 < n; ++p) {
    for (Eigen::Index q = p + 1; q < n; ++q) {
      const CMatrix outer = w.col(p) * w.col(q).adjoint();
      m = is2 * (outer + outer.adjoint());
      h.col(col++) = svec(m);
      m = Complex(0, 1) * is2 * (outer - outer.adjoint());
      h.col(col++) = svec(m);
    }
  }
  h = 0.5 * (h + h.transpose()).eval();
}

// --------------------------- second-order cone -----------------------------

inline double soc_jdot(const RVector& u, const RVector& v) {
  return u[0] * v[0] - u.tail(u.size() - 1).dot(v.tail(v.size() - 1));
}

inline RVector soc_sqrt(const RVector& u) {
  const double det = soc_jdot(u, u);
  if (det <= 0.0 || u[0] <= 0.0) throw ipm_breakdown("second-order iterate left the cone");
  const double root = std::sqrt(det);
  RVector v(u.size());
  v[0] = std::sqrt(0.5 * (u[0] + root));
  v.tail(u.size() - 1) = u.tail(u.size() - 1) / (2.0 * v[0]);
  return v;
}

inline RVector soc_inv(const RVector& u) {
  const double det = soc_jdot(u, u);
  if (det == 0.0) throw ipm_breakdown("singular second-order element");
  RVector v(u.size());
  v[0] = u[0] / det;
  v.tail(u.size() - 1) = -u.tail(u.size() - 1) / det;
  return v;
}

inline RVector soc_quad_rep(const RVector& u, const RVector& v) {
  const double det = soc_jdot(u, u);
  RVector jv(v.size());
  jv[0] = v[0];
  jv.tail(v.size() - 1) = -v.tail(v.size() - 1);
  return 2.0 * u.dot(v) * u - det * jv;
}

inline RVector soc_jordan_product(const RVector& u, const RVector& v) {
  RVector out(u.size());
  out[0] = u.dot(v);
  out.tail(u.size() - 1) = u[0] * v.tail(v.size() - 1) + v[0] * u.tail(u.size() - 1);
  return out;
}

// Arrow-matrix solve L_u out = v.
inline RVector soc_lam_solve(const RVector& u, const RVector& v) {
  const double det = soc_jdot(u, u);
  if (det <= 0.0) throw ipm_breakdown("singular second-order scaled point");
  const Eigen::Index d = u.size();
  RVector out(d);
  const double x0 = (u[0] * v[0] - u.tail(d - 1).dot(v.tail(d - 1))) / det;
  out[0] = x0;
  out.tail(d - 1) = (v.tail(d - 1) - x0 * u.tail(d - 1)) / u[0];
  return out;
}

struct SocScaling {
  RVector w;    // scaling point
  RVector lam;  // scaled point
};

inline SocScaling soc_scaling(const RVector& x, const RVector& s) {
  if (soc_jdot(x, x) <= 0.0 || x[0] <= 0.0 || soc_jdot(s, s) <= 0.0 || s[0] <= 0.0)
    throw ipm_breakdown("second-order iterate left the cone");
  const RVector x_half = soc_sqrt(x);
  const RVector z = soc_quad_rep(x_half, s);
  const RVector w = soc_quad_rep(x_half, soc_inv(soc_sqrt(z)));
  SocScaling sc;
  sc.lam = soc_quad_rep(soc_inv(soc_sqrt(w)), x);
  sc.w = w;
  return sc;
}

inline double soc_step_to_boundary(const RVector& x, const RVector& d) {
  // largest alpha with x + alpha d staying inside the cone
  const double q2 = soc_jdot(d, d);
  const double q1 = 2.0 * soc_jdot(x, d);
  const double q0 = soc_jdot(x, x);
  double best = std::numeric_limits<double>::infinity();
  if (std::abs(q2) < 1e-300) {
    if (q1 < 0.0) best = -q0 / q1;
  } else {
    const double disc = q1 * q1 - 4.0 * q2 * q0;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double r1 = (-q1 - sq) / (2.0 * q2);
      const double r2 = (-q1 + sq) / (2.0 * q2);
      for (double r : {std::min(r1, r2), std::max(r1, r2)}) {
        if (r > 0.0) {
          best = r;
          break;
        }
      }
    }
  }
  if (d[0] < 0.0) best = std::min(best, -x[0] / d[0]);
  return best;
}

inline RVector soc_scaling_matrix_times(const RVector& w, const RVector& v) {
  return soc_quad_rep(w, v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// the program
// ---------------------------------------------------------------------------

class ConicProgram {
 public:
  std::vector<ConeBlock> cones;
  RMatrix A;
  RVector b;
  RVector c;
  RVector x0, y0, s0;

  Eigen::Index total_len() const {
    Eigen::Index t = 0;
    for (const auto& blk : cones) t += blk.vec_len();
    return t;
  }

  /// Identity element of the cone product (useful for building starts).
  RVector identity_element() const {
    RVector e(total_len());
    Eigen::Index off = 0;
    for (const auto& blk : cones) {
      if (blk.kind == ConeBlock::Kind::Psd) {
        e.segment(off, blk.vec_len()) = svec(CMatrix::Identity(blk.n, blk.n));
      } else {
        e.segment(off, blk.vec_len()).setZero();
        e[off] = 1.0;
      }
      off += blk.vec_len();
    }
    return e;
  }

  ConicResult solve(const SolverOptions& opts = {}) const;
};

namespace detail {

struct BlockScalings {
  std::vector<PsdScaling> psd;
  std::vector<SocScaling> soc;
};

}  // namespace detail

inline ConicResult ConicProgram::solve(const SolverOptions& opts) const {
  using namespace detail;
  const Eigen::Index n = total_len();
  const Eigen::Index m = b.size();
  double nu = 0.0;
  for (const auto& blk : cones) nu += blk.barrier_rank();

  RVector x = x0, y = y0, s = s0;
  ConicResult best;
  double best_score = std::numeric_limits<double>::infinity();

  const auto record_candidate = [&](int iter) {
    const double pobj = c.dot(x);
    const double dobj = b.dot(y);
    const double rp = (b - A * x).norm();
    const double rd = (c - A.transpose() * y - s).norm();
    const double scale = std::max({1.0, std::abs(pobj), std::abs(dobj)});
    const double relgap = std::abs(pobj - dobj) / scale;
    const double mu_rel = x.dot(s) / nu / scale;
    const double score = std::max({rp, rd, relgap, mu_rel});
    if (score < best_score) {
      best_score = score;
      best.x = x;
      best.y = y;
      best.s = s;
      best.iterations = iter;
      best.primal_obj = pobj;
      best.dual_obj = dobj;
      best.r_primal = rp;
      best.r_dual = rd;
      best.rel_gap = relgap;
      best.mu = x.dot(s) / nu;
    }
    return std::make_tuple(rp, rd, relgap, mu_rel);
  };

  std::vector<ConicResult> dummy;
  int iter = 0;
  bool converged = false;
  std::string breakdown_msg;

  try {
    for (iter = 0; iter < opts.max_iterations; ++iter) {
      const auto [rp_n, rd_n, relgap, mu_rel] = record_candidate(iter);
      if (rp_n <= opts.feas_tol && rd_n <= opts.feas_tol && relgap <= opts.gap_tol &&
          mu_rel <= 10.0 * opts.gap_tol) {
        converged = true;
        break;
      }

      const RVector rp = b - A * x;
      const RVector rd = c - A.transpose() * y - s;
      const double mu = x.dot(s) / nu;

      // per-block NT scalings and the dense scaling operator H
      BlockScalings sc;
      RMatrix H = RMatrix::Zero(n, n);
      {
        Eigen::Index off = 0;
        for (const auto& blk : cones) {
          const Eigen::Index len = blk.vec_len();
          if (blk.kind == ConeBlock::Kind::Psd) {
            PsdScaling ps = psd_scaling(smat(x.segment(off, len), blk.n),
                                        smat(s.segment(off, len), blk.n));
            psd_scaling_operator(ps.w, H.block(off, off, len, len));
            sc.psd.push_back(std::move(ps));
          } else {
            SocScaling ss = soc_scaling(x.segment(off, len), s.segment(off, len));
            const double det_w = soc_jdot(ss.w, ss.w);
            RMatrix hb = 2.0 * ss.w * ss.w.transpose();
            hb(0, 0) -= det_w;
            for (Eigen::Index i = 1; i < len; ++i) hb(i, i) += det_w;
            H.block(off, off, len, len) = hb;
            sc.soc.push_back(std::move(ss));
          }
          off += len;
        }
      }

      RMatrix schur = A * H * A.transpose();
      schur = 0.5 * (schur + schur.transpose()).eval();
      Eigen::LLT<RMatrix> llt(schur);
      if (llt.info() != Eigen::Success) {
        double ridge = 1e-14 * std::max(1.0, schur.trace() / double(m));
        while (llt.info() != Eigen::Success && ridge < 1e-4) {
          llt.compute(schur + ridge * RMatrix::Identity(m, m));
          ridge *= 100.0;
        }
        if (llt.info() != Eigen::Success) throw ipm_breakdown("Schur complement not PD");
      }

      const RVector Hrd = H * rd;

      const auto solve_direction = [&](const RVector& g, RVector& dx, RVector& dy,
                                       RVector& ds) {
        dy = llt.solve(rp - A * g + A * Hrd);
        ds = rd - A.transpose() * dy;
        dx = g - H * ds;
      };

      // direction-dependent step length, evaluated in scaled coordinates
      const auto step_bound = [&](const RVector& dx, const RVector& ds) {
        double alpha = std::numeric_limits<double>::infinity();
        Eigen::Index off = 0;
        size_t ipsd = 0, isoc = 0;
        for (const auto& blk : cones) {
          const Eigen::Index len = blk.vec_len();
          if (blk.kind == ConeBlock::Kind::Psd) {
            const PsdScaling& ps = sc.psd[ipsd++];
            const RMatrix dxh =
                ps.w_ihalf * embed(smat(dx.segment(off, len), blk.n)) * ps.w_ihalf;
            const RMatrix dsh =
                ps.w_half * embed(smat(ds.segment(off, len), blk.n)) * ps.w_half;
            alpha = std::min(alpha, psd_step_to_boundary(ps, dxh));
            alpha = std::min(alpha, psd_step_to_boundary(ps, dsh));
          } else {
            const SocScaling& ss = sc.soc[isoc++];
            alpha = std::min(alpha, soc_step_to_boundary(x.segment(off, len),
                                                         dx.segment(off, len)));
            alpha = std::min(alpha, soc_step_to_boundary(s.segment(off, len),
                                                         ds.segment(off, len)));
            (void)ss;
          }
          off += len;
        }
        return alpha;
      };

      // predictor: G = -x makes the scaled complementarity target zero
      RVector dx_aff(n), dy_aff(m), ds_aff(n);
      solve_direction(-x, dx_aff, dy_aff, ds_aff);
      const double alpha_aff = std::min(1.0, step_bound(dx_aff, ds_aff));

      const double mu_aff =
          std::max(0.0, (x + alpha_aff * dx_aff).dot(s + alpha_aff * ds_aff)) / nu;
      double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3);
      sigma = std::min(1.0, std::max(0.0, sigma));
      if (iter == 0) sigma = std::max(sigma, opts.initial_centering);

      // corrector target sigma*mu*e - lam o lam - (dxh_aff o dsh_aff)
      RVector g(n);
      {
        Eigen::Index off = 0;
        size_t ipsd = 0, isoc = 0;
        for (const auto& blk : cones) {
          const Eigen::Index len = blk.vec_len();
          if (blk.kind == ConeBlock::Kind::Psd) {
            const PsdScaling& ps = sc.psd[ipsd++];
            const RMatrix dxh =
                ps.w_ihalf * embed(smat(dx_aff.segment(off, len), blk.n)) * ps.w_ihalf;
            const RMatrix dsh =
                ps.w_half * embed(smat(ds_aff.segment(off, len), blk.n)) * ps.w_half;
            const RMatrix lam_e =
                ps.lam_eig.q * ps.lam_eig.d.asDiagonal() * ps.lam_eig.q.transpose();
            RMatrix rhs = -lam_e * lam_e - 0.5 * (dxh * dsh + dsh * dxh);
            rhs += sigma * mu * RMatrix::Identity(2 * blk.n, 2 * blk.n);
            rhs = 0.5 * (rhs + rhs.transpose()).eval();
            const RMatrix d = psd_lam_solve(ps, rhs);
            const RMatrix ge = ps.w_half * d * ps.w_half;
            g.segment(off, len) = svec(unembed(ge));
          } else {
            const SocScaling& ss = sc.soc[isoc++];
            const RVector w_ihalf = soc_inv(soc_sqrt(ss.w));
            const RVector w_half = soc_sqrt(ss.w);
            const RVector dxh = soc_quad_rep(w_ihalf, dx_aff.segment(off, len));
            const RVector dsh = soc_quad_rep(w_half, ds_aff.segment(off, len));
            RVector rhs = -soc_jordan_product(ss.lam, ss.lam) -
                          soc_jordan_product(dxh, dsh);
            rhs[0] += sigma * mu;
            const RVector d = soc_lam_solve(ss.lam, rhs);
            g.segment(off, len) = soc_quad_rep(w_half, d);
          }
          off += len;
        }
      }

      RVector dx(n), dy(m), ds(n);
      solve_direction(g, dx, dy, ds);
      const double alpha = std::min(1.0, opts.step_fraction * step_bound(dx, ds));
      if (!std::isfinite(alpha) || alpha <= 1e-14)
        throw ipm_breakdown("step length collapsed");

      x += alpha * dx;
      y += alpha * dy;
      s += alpha * ds;

      if (opts.record_trace)
        best.trace.push_back(IterationRecord{iter, mu, c.dot(x), b.dot(y),
                                             (b - A * x).norm(),
                                             (c - A.transpose() * y - s).norm(), sigma,
                                             alpha});
    }
  } catch (const ipm_breakdown& e) {
    breakdown_msg = e.what();
  }

  if (converged || iter >= opts.max_iterations || !breakdown_msg.empty())
    record_candidate(iter);

  best.status = SolveStatus::Failed;
  if (best.r_primal <= opts.feas_tol && best.r_dual <= opts.feas_tol &&
      best.rel_gap <= opts.gap_tol && best.mu <= 10.0 * opts.gap_tol *
          std::max({1.0, std::abs(best.primal_obj), std::abs(best.dual_obj)})) {
    best.status = SolveStatus::Optimal;
  } else if (best.r_primal <= opts.degraded_feas_tol &&
             best.r_dual <= opts.degraded_feas_tol &&
             best.rel_gap <= opts.degraded_gap_tol) {
    best.status = SolveStatus::Degraded;
  }
  return best;
}

}  // namespace qmibeam
