// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <boost/multiprecision/gmp.hpp>

#include "cpwl/lp.hpp"

using namespace cpwl;
using Q = boost::multiprecision::mpq_rational;

TEST_CASE("textbook maximization") {
  // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
  lp::Mat<double> A(3, 2);
  A << 1, 0, 0, 2, 3, 2;
  lp::Vec<double> b(3), c(2);
  b << 4, 12, 18;
  c << 3, 5;
  const auto r = lp::maximize<double>(A, b, c, 1e-12);
  REQUIRE(r.status == lp::Status::optimal);
  CHECK(r.value == doctest::Approx(36.0));
  CHECK(r.x[0] == doctest::Approx(2.0));
  CHECK(r.x[1] == doctest::Approx(6.0));
}

TEST_CASE("infeasible and unbounded") {
  lp::Mat<double> A(2, 1);
  A << 1, -1;
  lp::Vec<double> b(2), c(1);
  b << 1, -2;  // x <= 1 and x >= 2
  c << 1;
  CHECK(lp::maximize<double>(A, b, c, 1e-12).status == lp::Status::infeasible);
  lp::Mat<double> B(1, 1);
  B << -1;
  lp::Vec<double> bb(1);
  bb << 0;
  CHECK(lp::maximize<double>(B, bb, c, 1e-12).status == lp::Status::unbounded);
}

TEST_CASE("phase one handles negative right-hand sides") {
  // x + y >= 2, x <= 3, y <= 3, max -x - y -> -2
  lp::Mat<double> A(3, 2);
  A << -1, -1, 1, 0, 0, 1;
  lp::Vec<double> b(3), c(2);
  b << -2, 3, 3;
  c << -1, -1;
  const auto r = lp::maximize<double>(A, b, c, 1e-12);
  REQUIRE(r.status == lp::Status::optimal);
  CHECK(r.value == doctest::Approx(-2.0));
}

TEST_CASE("exact rational solve matches double and brute-force vertices") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> u(-5, 5);
  for (int trial = 0; trial < 40; ++trial) {
    // box-bounded 2D problem: vertices enumerated by brute force
    const int m = 4;
    lp::Mat<double> A(m + 2, 2);
    lp::Vec<double> b(m + 2), c(2);
    for (int i = 0; i < m; ++i) {
      A(i, 0) = u(rng);
      A(i, 1) = u(rng);
      b(i) = std::abs(u(rng)) + 1;
    }
    A.row(m) << 1, 0;
    A.row(m + 1) << 0, 1;
    b(m) = 10;
    b(m + 1) = 10;
    c << u(rng), u(rng);
    // brute force over all pairs of tight constraints including x, y >= 0
    lp::Mat<double> G(m + 4, 2);
    lp::Vec<double> h(m + 4);
    G.topRows(m + 2) = A;
    h.head(m + 2) = b;
    G.row(m + 2) << -1, 0;
    G.row(m + 3) << 0, -1;
    h(m + 2) = 0;
    h(m + 3) = 0;
    double best = -1e300;
    for (int i = 0; i < m + 4; ++i) {
      for (int j = i + 1; j < m + 4; ++j) {
        Eigen::Matrix2d M;
        M.row(0) = G.row(i);
        M.row(1) = G.row(j);
        if (std::abs(M.determinant()) < 1e-12) continue;
        const Eigen::Vector2d p = M.inverse() * Eigen::Vector2d(h(i), h(j));
        if (((G * p - h).array() <= 1e-9).all()) best = std::max(best, c.dot(p));
      }
    }
    const auto rd = lp::maximize<double>(A, b, c, 1e-12);
    REQUIRE(rd.status == lp::Status::optimal);
    CHECK(rd.value == doctest::Approx(best));
    lp::Mat<Q> Aq = A.cast<Q>();
    lp::Vec<Q> bq = b.cast<Q>(), cq = c.cast<Q>();
    const auto rq = lp::maximize<Q>(Aq, bq, cq, Q(0));
    REQUIRE(rq.status == lp::Status::optimal);
    CHECK(rq.value.convert_to<double>() == doctest::Approx(best));
  }
}
