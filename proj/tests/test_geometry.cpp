// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <regex>

#include "cpwl/geometry.hpp"
#include "test_util.hpp"

using namespace cpwl;
using testutil::mat;
using testutil::vec;

namespace {

// One hidden ReLU layer over R^2 whose units switch on the given lines.
NetworkSpec relu_lines(const std::vector<std::pair<Vector, double>>& lines) {
  Matrix A(static_cast<Eigen::Index>(lines.size()), 2);
  Vector b(static_cast<Eigen::Index>(lines.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = lines[i].first.transpose();
    b[static_cast<Eigen::Index>(i)] = -lines[i].second;
  }
  NetworkSpec net;
  net.input_dim = 2;
  net.layers.emplace_back(AffineLayer{AffineMap(A, b)});
  net.layers.emplace_back(PointwiseLayer{std::vector<ScalarCPWL>(lines.size(), ScalarCPWL::relu())});
  return net;
}

}  // namespace

TEST_CASE("three generic lines give seven cells") {
  const std::vector<std::pair<Vector, double>> lines{
      {vec({1, 0}), 0.0}, {vec({0, 1}), 0.0}, {vec({1, 1}), 1.0}};
  const auto rs = enumerate_regions(relu_lines(lines));
  CHECK(rs.regions.size() == 7);
  CHECK(testutil::line_arrangement_regions(lines) == 7);
}

TEST_CASE("line arrangements match the planar formula") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> coef(-3, 3), nl(1, 6);
  for (int t = 0; t < 60; ++t) {
    std::vector<std::pair<Vector, double>> lines;
    const int n = nl(rng);
    while (static_cast<int>(lines.size()) < n) {
      // small integers make concurrent and parallel lines common
      Vector a = vec({double(coef(rng)), double(coef(rng))});
      if (a.norm() == 0) continue;
      bool dup = false;
      const double c = coef(rng);
      for (const auto& [b, e] : lines) {
        dup = dup || (std::abs(a[0] * b[1] - a[1] * b[0]) < 1e-12 &&
                      std::abs(a.dot(b) * e - b.squaredNorm() * c) < 1e-12);
      }
      if (!dup) lines.emplace_back(a, c);
    }
    const auto rs = enumerate_regions(relu_lines(lines));
    CHECK(rs.regions.size() == testutil::line_arrangement_regions(lines));
    const auto ex = enumerate_regions_exact(relu_lines(lines));
    CHECK(ex.cells == rs.regions.size());
  }
}

TEST_CASE("regions are sound and partition the domain") {
  std::mt19937_64 rng(22);
  for (const char* fam : {"relu", "deepspline", "maxout", "groupsort"}) {
    for (int t = 0; t < 4; ++t) {
      const NetworkSpec net = testutil::random_two_hidden(rng, fam, 4, 3);
      const Domain dom = Domain::cube(2, -3.0, 3.0);
      const auto rs = enumerate_regions(net, dom);
      for (const auto& r : rs.regions) {
        CHECK(r.radius > 0.0);
        CHECK(r.contains(r.witness));
        CHECK((eval(net, r.witness) - r.piece(r.witness)).norm() < 1e-8);
      }
      std::uniform_real_distribution<double> u(-3.0, 3.0);
      for (int i = 0; i < 200; ++i) {
        const Vector x = vec({u(rng), u(rng)});
        std::size_t inside = 0;
        for (const auto& r : rs.regions) {
          if (r.contains(x, 1e-12)) {
            ++inside;
            CHECK((eval(net, x) - r.piece(x)).norm() < 1e-8 * std::max(1.0, eval(net, x).norm()));
          }
        }
        CHECK(inside == 1);
      }
    }
  }
}

TEST_CASE("restricting the domain never adds cells") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    const NetworkSpec net = testutil::random_two_hidden(rng, "relu", 4, 2);
    const auto big = enumerate_regions(net).regions.size();
    const auto mid = enumerate_regions(net, Domain::cube(2, -2.0, 2.0)).regions.size();
    const auto small = enumerate_regions(net, Domain::cube(2, -0.5, 0.5)).regions.size();
    CHECK(small <= mid);
    CHECK(mid <= big);
  }
}

TEST_CASE("exact rational counts agree with the floating count") {
  std::mt19937_64 rng(24);
  for (const char* fam : {"relu", "deepspline", "maxout", "groupsort"}) {
    for (int t = 0; t < 3; ++t) {
      const NetworkSpec net = testutil::random_two_hidden(rng, fam, 4, 2);
      const auto rs = enumerate_regions(net);
      const auto rep = count_report(rs, net);
      const auto ex = enumerate_regions_exact(net);
      CHECK(ex.cells == rep.cell_count);
      CHECK(ex.distinct_pieces == rep.distinct_piece_count);
    }
  }
}

TEST_CASE("counts are dominated by the compositional upper bound") {
  std::mt19937_64 rng(25);
  for (const char* fam : {"relu", "deepspline", "maxout", "groupsort"}) {
    for (int t = 0; t < 5; ++t) {
      const NetworkSpec net = testutil::random_two_hidden(rng, fam, 4, 3);
      const auto rep = count_report(enumerate_regions(net), net);
      CHECK(rep.distinct_piece_count <= rep.cell_count);
      CHECK(rep.connected_piece_count <= rep.cell_count);
      CHECK(rep.distinct_piece_count <= rep.connected_piece_count);
      CHECK(BigInt(rep.cell_count) <= rep.compositional_upper);
    }
  }
}

TEST_CASE("a disconnected projection region") {
  // t -> relu(1 - |t|) on the first coordinate: the zero piece lives on both sides
  NetworkSpec net;
  net.input_dim = 2;
  net.layers.emplace_back(AffineLayer{AffineMap(mat({{1, 0}}), vec({0}))});
  net.layers.emplace_back(PointwiseLayer{{ScalarCPWL({-1, 0, 1}, {0, 1, -1, 0}, 0.0)}});
  const auto rep = count_report(enumerate_regions(net), net);
  CHECK(rep.cell_count == 4);
  CHECK(rep.distinct_piece_count == 3);
  CHECK(rep.connected_piece_count == 4);
}

TEST_CASE("sort and group sort layers") {
  NetworkSpec sort3;
  sort3.input_dim = 3;
  sort3.layers.emplace_back(GroupSortLayer{3});
  CHECK(enumerate_regions(sort3).regions.size() == 6);
  NetworkSpec gs4;
  gs4.input_dim = 4;
  gs4.layers.emplace_back(GroupSortLayer{2});
  const auto rs = enumerate_regions(gs4);
  const auto rep = count_report(rs, gs4);
  CHECK(rep.cell_count == 4);
  CHECK(rep.distinct_piece_count == 4);
}

TEST_CASE("pwlu unit cells") {
  for (std::size_t M : {2u, 3u, 4u}) {
    Pwlu2dLayer p;
    p.grid_m = M;
    std::mt19937_64 rng(M);
    p.values.push_back(testutil::random_matrix(rng, M, M));
    p.readin.push_back(AffineMap::identity(2));
    NetworkSpec net;
    net.input_dim = 2;
    net.layers.emplace_back(p);
    const auto inside = enumerate_regions(net, Domain::cube(2, -1.0, 1.0));
    CHECK(inside.regions.size() == 2 * (M - 1) * (M - 1));
    const auto all = enumerate_regions(net);
    CHECK(all.regions.size() == 2 * (M - 1) * (M - 1) + 4 * M);
  }
}

TEST_CASE("witness LP") {
  // triangle x >= 0, y >= 0, x + y <= 1 has inradius 1 / (2 + sqrt 2)
  std::vector<HalfSpace> tri{{vec({1, 0}), 0.0}, {vec({0, 1}), 0.0}, {vec({-1, -1}), 1.0}};
  const auto w = interior_witness(tri, 2, Domain::unbounded());
  REQUIRE(w.ok());
  CHECK(w.epsilon == doctest::Approx(1.0 / (2.0 + std::sqrt(2.0))).epsilon(1e-6));
  // a line segment has empty interior
  std::vector<HalfSpace> flat{{vec({1, 0}), 0.0}, {vec({-1, 0}), 0.0}};
  CHECK_FALSE(interior_witness(flat, 2, Domain::cube(2, -1, 1)).ok());
  std::vector<HalfSpace> empty{{vec({1, 0}), -2.0}, {vec({-1, 0}), 1.0}};
  CHECK(interior_witness(empty, 2, Domain::unbounded()).status == WitnessResult::Status::empty);
  const auto range = linear_range(tri, vec({1, 2}), Domain::unbounded());
  REQUIRE(range.has_value());
  CHECK(range->first == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(range->second == doctest::Approx(2.0));
}

TEST_CASE("budget and dimension limits") {
  std::mt19937_64 rng(26);
  const NetworkSpec net = testutil::random_two_hidden(rng, "relu", 5, 2);
  GeometryConfig cfg;
  cfg.max_cells = 3;
  CHECK_THROWS_AS(enumerate_regions(net, Domain::unbounded(), cfg), BudgetExceeded);
  cfg = GeometryConfig{};
  cfg.max_input_dim = 1;
  CHECK_THROWS_AS(enumerate_regions(net, Domain::unbounded(), cfg), std::invalid_argument);
}

TEST_CASE("thread count does not change the result") {
  std::mt19937_64 rng(27);
  const NetworkSpec net = testutil::random_two_hidden(rng, "maxout", 4, 3);
  GeometryConfig one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = enumerate_regions(net, Domain::unbounded(), one);
  const auto b = enumerate_regions(net, Domain::unbounded(), four);
  REQUIRE(a.regions.size() == b.regions.size());
  for (std::size_t i = 0; i < a.regions.size(); ++i) CHECK(a.regions[i].pattern == b.regions[i].pattern);
}

TEST_CASE("svg draws one polygon per cell") {
  std::mt19937_64 rng(28);
  const NetworkSpec net = testutil::random_two_hidden(rng, "relu", 3, 2);
  const Vector lo = vec({-2, -2}), hi = vec({2, 2});
  const auto rs = enumerate_regions(net, Domain::box(lo, hi));
  const std::string svg = render_svg(rs, lo, hi);
  const std::regex poly("<polygon");
  const auto n = std::distance(std::sregex_iterator(svg.begin(), svg.end(), poly), std::sregex_iterator());
  CHECK(static_cast<std::size_t>(n) == rs.regions.size());
  CHECK(svg.find("</svg>") != std::string::npos);
  NetworkSpec one = scalar_network(ScalarCPWL::relu());
  CHECK_THROWS_AS(render_svg(enumerate_regions(one), vec({-1}), vec({1})), std::invalid_argument);
}
