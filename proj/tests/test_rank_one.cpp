// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "qmibeam/rank_one.hpp"
#include "test_support.hpp"

using namespace qmibeam;
using qmibeam::testing::random_cvector;
using qmibeam::testing::random_hermitian;
using qmibeam::testing::random_psd;

TEST_CASE("numeric_rank") {
  REQUIRE(numeric_rank(HermitianMatrix::Identity(4), 1e-6) == 4);
  Xoshiro256 rng(1);
  REQUIRE(numeric_rank(HermitianMatrix::FromOuter(random_cvector(rng, 5)), 1e-6) == 1);
  REQUIRE(numeric_rank(HermitianMatrix::Diagonal(RVector{{1.0, 1e-12}}), 1e-6) == 1);
  REQUIRE(numeric_rank(HermitianMatrix::Zero(3)) == 0);
  REQUIRE_THROWS_AS(numeric_rank(HermitianMatrix::Diagonal(RVector{{1.0, -1.0}})),
                    std::domain_error);
}

TEST_CASE("rank-one input returns its generating vector up to phase") {
  Xoshiro256 rng(2);
  const CVector v = random_cvector(rng, 4);
  const auto res = rank_one_decompose(HermitianMatrix::FromOuter(v), random_hermitian(rng, 4),
                                      random_hermitian(rng, 4));
  REQUIRE(res.vectors.size() == 1);
  const double overlap = std::abs(res.vectors[0].dot(v));
  REQUIRE(overlap == Catch::Approx(v.norm() * v.norm()).epsilon(1e-10));
}

TEST_CASE("identity with indefinite A splits into balanced vectors") {
  const HermitianMatrix x = HermitianMatrix::Identity(2);
  const HermitianMatrix a = HermitianMatrix::Diagonal(RVector{{1.0, -1.0}});
  const HermitianMatrix b = HermitianMatrix::Identity(2);
  const auto res = rank_one_decompose(x, a, b);
  REQUIRE(res.vectors.size() == 2);
  for (const auto& v : res.vectors) {
    REQUIRE(quadratic_form(v, a) == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(quadratic_form(v, b) == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("identity with A = B = I keeps unit forms") {
  const auto res = rank_one_decompose(HermitianMatrix::Identity(5),
                                      HermitianMatrix::Identity(5),
                                      HermitianMatrix::Identity(5));
  REQUIRE(res.vectors.size() == 5);
  for (const auto& v : res.vectors)
    REQUIRE(v.squaredNorm() == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("post-conditions on random instances") {
  Xoshiro256 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 9);
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.next_u64() % n);
    const HermitianMatrix x = random_psd(rng, n, r);
    const HermitianMatrix a = random_hermitian(rng, n);
    const HermitianMatrix b = random_hermitian(rng, n);

    const auto res = rank_one_decompose(x, a, b);
    REQUIRE(res.rank == numeric_rank(x));
    REQUIRE(Eigen::Index(res.vectors.size()) == res.rank);

    CMatrix recon = CMatrix::Zero(n, n);
    for (const auto& v : res.vectors) recon += v * v.adjoint();
    REQUIRE((recon - x.mat()).norm() <= 1e-8 * std::max(1.0, x.mat().norm()));

    const double ta = trace_product(a, x) / double(res.rank);
    const double tb = trace_product(b, x) / double(res.rank);
    for (const auto& v : res.vectors) {
      REQUIRE(quadratic_form(v, a) ==
              Catch::Approx(ta).epsilon(1e-8).margin(1e-8));
      REQUIRE(quadratic_form(v, b) ==
              Catch::Approx(tb).epsilon(1e-8).margin(1e-8));
    }

    // deterministic phase convention: first sizable entry real nonnegative
    for (const auto& v : res.vectors) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-12 * std::max(1.0, v.norm())) {
          REQUIRE(v[i].imag() == Catch::Approx(0.0).margin(1e-12));
          REQUIRE(v[i].real() >= 0.0);
          break;
        }
      }
    }
  }
}

TEST_CASE("unreachable tolerance reports achieved residuals") {
  Xoshiro256 rng(4);
  const HermitianMatrix x = random_psd(rng, 4, 3);
  try {
    rank_one_decompose(x, random_hermitian(rng, 4), random_hermitian(rng, 4), 1e-30);
    FAIL("expected decomposition_error");
  } catch (const decomposition_error& e) {
    REQUIRE(std::isfinite(e.recon_error));
    REQUIRE(std::isfinite(e.a_form_error));
  }
}
