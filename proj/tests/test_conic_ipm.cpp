// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "qmibeam/relaxation.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace qmibeam;
using qmibeam::testing::random_pd;
using qmibeam::testing::random_psd;

namespace {

HermitianMatrix scalar(double v) { return HermitianMatrix::Diagonal(RVector::Constant(1, v)); }

}  // namespace

TEST_CASE("relaxation problem validation") {
  REQUIRE_THROWS_AS(RelaxationProblem(scalar(1.0), scalar(0.0), 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(RelaxationProblem(scalar(-1.0), scalar(1.0), 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(RelaxationProblem(scalar(1.0), scalar(1.0), 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(RelaxationProblem(scalar(1.0), HermitianMatrix::Identity(2), 1.0),
                    std::invalid_argument);
}

TEST_CASE("scalar relaxation instances enumerate correctly") {
  // max over Y <= W = 1 of 3Y - eps|Y|
  SECTION("eps = 1 gives 2 at W = Y = t = 1") {
    const ConicSolution sol = solve_relaxation(RelaxationProblem(scalar(3.0), scalar(1.0), 1.0));
    REQUIRE(sol.status == SolveStatus::Optimal);
    REQUIRE(sol.primal_value == Catch::Approx(2.0).margin(1e-7));
    REQUIRE(sol.W.mat()(0, 0).real() == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(sol.Y.mat()(0, 0).real() == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(sol.t == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(sol.residuals.max_comp() <= 1e-6);
  }
  SECTION("eps = 4 gives 0 at Y = 0") {
    const ConicSolution sol = solve_relaxation(RelaxationProblem(scalar(3.0), scalar(1.0), 4.0));
    REQUIRE(sol.primal_value == Catch::Approx(0.0).margin(1e-7));
    REQUIRE(std::abs(sol.Y.mat()(0, 0)) <= 1e-6);
  }
}

TEST_CASE("vanishing uncertainty reduces to the generalized eigenvalue problem") {
  const RelaxationProblem prob(HermitianMatrix::Diagonal(RVector{{2.0, 1.0}}),
                               HermitianMatrix::Identity(2), 1e-8);
  const ConicSolution sol = solve_relaxation(prob);
  REQUIRE(sol.primal_value == Catch::Approx(2.0).margin(1e-6));
  const EigenPair ew = eig_hermitian(sol.W);
  REQUIRE(ew.values[1] / ew.values[0] < 1e-5);  // rank one
}

TEST_CASE("check_kkt on the hand-built scalar optimum") {
  const RelaxationProblem prob(scalar(3.0), scalar(1.0), 1.0);
  ConicSolution sol{scalar(1.0), scalar(1.0), 1.0, 2.0, scalar(2.0)};
  sol.primal_value = 2.0;
  sol.dual_value = 2.0;
  const KktReport r = check_kkt(sol, prob);
  REQUIRE(r.r_comp1 == 0.0);
  REQUIRE(r.r_comp2 == 0.0);
  REQUIRE(r.r_comp3 == 0.0);
  REQUIRE(r.r_compact == 0.0);
  REQUIRE(r.r_primal <= 1e-15);
  REQUIRE(r.r_dual <= 1e-15);

  ConicSolution bad = sol;
  bad.Y = scalar(1.1);
  REQUIRE(check_kkt(bad, prob).r_compact > 0.05);
}

TEST_CASE("strong duality and KKT residuals on random instances") {
  Xoshiro256 rng(100);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 5);
    const HermitianMatrix rs = random_psd(rng, n, n);
    const HermitianMatrix a = random_pd(rng, n, 0.5, 2.0);
    const double eps = 0.5 * frob_norm(rs);
    const ConicSolution sol = solve_relaxation(RelaxationProblem(rs, a, eps));
    REQUIRE(sol.status == SolveStatus::Optimal);
    const double scale = std::max(1.0, std::abs(sol.primal_value));
    REQUIRE(std::abs(sol.primal_value - sol.dual_value) <= 1e-6 * scale);
    REQUIRE(sol.residuals.max_comp() <= 1e-6 * scale);

    // trace bounds on W from the feasibility constraint
    const EigenPair ea = eig_hermitian(a);
    REQUIRE(sol.W.trace() >= 1.0 / ea.values[0] - 1e-6);
    REQUIRE(sol.W.trace() <= 1.0 / ea.values[n - 1] + 1e-6);
  }
}

TEST_CASE("weak duality holds along the whole iterate trace") {
  Xoshiro256 rng(200);
  const HermitianMatrix rs = random_psd(rng, 4, 4);
  const HermitianMatrix a = random_pd(rng, 4);
  SolverOptions opts;
  opts.record_trace = true;
  const ConicSolution sol = solve_relaxation(RelaxationProblem(rs, a, 1.0), opts);
  REQUIRE(sol.trace.size() > 3);
  for (const auto& rec : sol.trace) {
    const double slack = 1e-7 * std::max(1.0, std::abs(rec.dual_obj)) + rec.r_primal + rec.r_dual;
    REQUIRE(rec.dual_obj >= rec.primal_obj - slack);
  }
}

TEST_CASE("solver output is deterministic") {
  Xoshiro256 rng(300);
  const HermitianMatrix rs = random_psd(rng, 3, 2);
  const HermitianMatrix a = random_pd(rng, 3);
  const RelaxationProblem prob(rs, a, 0.7);
  const ConicSolution s1 = solve_relaxation(prob);
  const ConicSolution s2 = solve_relaxation(prob);
  REQUIRE(std::memcmp(s1.W.mat().data(), s2.W.mat().data(), sizeof(Complex) * 9) == 0);
  REQUIRE(s1.primal_value == s2.primal_value);
  REQUIRE(s1.iterations == s2.iterations);
}

TEST_CASE("inner problem: vanishing eps recovers tr(Rs W)") {
  Xoshiro256 rng(400);
  const HermitianMatrix rs = random_psd(rng, 3, 3);
  const HermitianMatrix wf = random_psd(rng, 3, 2);
  const InnerSolution sol = solve_inner(wf, rs, 1e-8);
  REQUIRE(sol.value == Catch::Approx(trace_product(rs, wf)).margin(1e-5));
  REQUIRE((sol.Y.mat() - wf.mat()).norm() <= 1e-3);
}

TEST_CASE("inner problem scalar cases") {
  const InnerSolution sol = solve_inner(scalar(1.0), scalar(3.0), 1.0);
  REQUIRE(sol.value == Catch::Approx(2.0).margin(1e-7));
  REQUIRE(sol.Y.mat()(0, 0).real() == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(std::abs(sol.value - sol.dual_value) <= 1e-6);

  const InnerSolution zero = solve_inner(scalar(0.0), scalar(3.0), 1.0);
  REQUIRE(std::abs(zero.value) <= 1e-7);
  REQUIRE(frob_norm(zero.Y) <= 1e-5);
}

TEST_CASE("inner problem agrees with the brute-force uncertainty-set oracle") {
  SECTION("N = 1 closed form across an eps grid") {
    for (double eps : {0.25, 1.0, 2.5, 5.0}) {
      for (double rs : {0.5, 3.0}) {
        for (double w : {0.7, 1.3}) {
          const InnerSolution sol =
              solve_inner(scalar(w * w), scalar(rs), eps);
          const double expect = testing::worst_case_numerator_oracle_1d(rs, w * w, eps);
          REQUIRE(sol.value == Catch::Approx(expect).margin(1e-6));
        }
      }
    }
  }
  SECTION("N = 2 grid/projection oracle") {
    Xoshiro256 rng(500);
    const HermitianMatrix rs = random_psd(rng, 2, 2);
    const CVector w = testing::random_cvector(rng, 2).normalized();
    for (double eps : {0.3, 0.9}) {
      const InnerSolution sol = solve_inner(HermitianMatrix::FromOuter(w), rs, eps);
      const double oracle = testing::worst_case_numerator_oracle_2d(w, rs, eps);
      REQUIRE(sol.value == Catch::Approx(oracle).margin(1e-4));
    }
  }
}

TEST_CASE("relaxation upper-bounds every fixed-weight inner value") {
  Xoshiro256 rng(600);
  const Eigen::Index n = 3;
  const HermitianMatrix rs = random_psd(rng, n, n);
  const HermitianMatrix a = random_pd(rng, n);
  const double eps = 0.4 * frob_norm(rs);
  const ConicSolution relax = solve_relaxation(RelaxationProblem(rs, a, eps));
  for (int i = 0; i < 5; ++i) {
    CVector w = testing::random_cvector(rng, n);
    w /= std::sqrt(quadratic_form(w, a));  // unit denominator
    const InnerSolution inner = solve_inner(HermitianMatrix::FromOuter(w), rs, eps);
    REQUIRE(inner.value <= relax.primal_value + 1e-6 * std::max(1.0, std::abs(relax.primal_value)));
  }
}
