// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cpwl/constructions.hpp"
#include "cpwl/paths.hpp"
#include "test_util.hpp"

using namespace cpwl;
using testutil::mat;
using testutil::vec;

namespace {

// x -> relu(x_0) + relu(x_1)
NetworkSpec two_relus() {
  NetworkSpec net;
  net.input_dim = 2;
  net.layers.emplace_back(PointwiseLayer{{ScalarCPWL::relu(), ScalarCPWL::relu()}});
  net.layers.emplace_back(AffineLayer{AffineMap(mat({{1, 1}}), vec({0}))});
  return net;
}

PolygonalPath random_path(std::mt19937_64& rng, std::size_t dim, std::size_t n) {
  PolygonalPath p;
  for (std::size_t i = 0; i < n; ++i) p.vertices.push_back(testutil::random_vector(rng, dim, 2.0));
  return p;
}

}  // namespace

TEST_CASE("path geometry") {
  const PolygonalPath p{{vec({0, 0}), vec({3, 0}), vec({3, 4})}};
  CHECK(p.length() == doctest::Approx(7.0));
  CHECK(p.point_at(5.0).isApprox(vec({3, 2})));
  CHECK(p.reversed().vertices.front() == vec({3, 4}));
  CHECK_THROWS_AS((PolygonalPath{{vec({0, 0})}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((PolygonalPath{{vec({0, 0}), vec({0, 0})}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((PolygonalPath{{vec({0, 0}), vec({1})}}.validate()), std::invalid_argument);
}

TEST_CASE("single knots") {
  const auto relu = scalar_network(ScalarCPWL::relu());
  const auto r = count_knots(relu, PolygonalPath::segment(vec({-1}), vec({1})));
  CHECK(r.count == 1);
  CHECK(r.density == doctest::Approx(0.5));
  CHECK(r.knots[0].t == doctest::Approx(1.0));
  CHECK(r.knots[0].layer == 0);
  CHECK(r.density * r.length == doctest::Approx(static_cast<double>(r.count)));
  const auto affine = affine_network(AffineMap(mat({{2, -1}}), vec({3})));
  CHECK(count_knots(affine, PolygonalPath::segment(vec({-5, 1}), vec({4, 2}))).count == 0);
}

TEST_CASE("sawtooth knots sit on the grid") {
  const auto r = count_knots(scalar_network(sawtooth(4)), PolygonalPath::segment(vec({0}), vec({1})));
  REQUIRE(r.count == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(r.knots[k].t == doctest::Approx(0.25 * double(k + 1)));
  for (std::size_t p = 2; p <= 12; ++p) {
    const auto net = sawtooth_composition(p, 3);
    CHECK(count_knots(net, PolygonalPath::segment(vec({-0.01}), vec({1.01}))).count == 3 * p - 1);
  }
}

TEST_CASE("polyline crossing three boundaries") {
  const PolygonalPath p{{vec({-1, -1}), vec({1, -0.5}), vec({1, 1}), vec({-1, 1})}};
  const auto r = count_knots(two_relus(), p);
  CHECK(r.count == 3);
  CHECK(r.knots[0].segment == 0);
  CHECK(r.knots[1].segment == 1);
  CHECK(r.knots[2].segment == 2);
}

TEST_CASE("knot at a vertex belongs to the earlier segment") {
  const auto relu = scalar_network(ScalarCPWL::relu());
  const PolygonalPath p{{vec({-1}), vec({0}), vec({1})}};
  const auto r = count_knots(relu, p);
  REQUIRE(r.count == 1);
  CHECK(r.knots[0].segment == 0);
  CHECK(r.knots[0].at_vertex);
  // a path that turns back at the kink never leaves the zero piece on one side
  const PolygonalPath back{{vec({-1}), vec({0}), vec({-1})}};
  CHECK(count_knots(relu, back).count == 0);
}

TEST_CASE("a path along a boundary has no knots") {
  const PolygonalPath p = PolygonalPath::segment(vec({0, -1}), vec({0, 1}));
  NetworkSpec net;
  net.input_dim = 2;
  net.layers.emplace_back(AffineLayer{AffineMap(mat({{1, 0}}), vec({0}))});
  net.layers.emplace_back(PointwiseLayer{{ScalarCPWL::relu()}});
  CHECK(count_knots(net, p).count == 0);
}

TEST_CASE("simultaneous switches are flagged") {
  NetworkSpec net;
  net.input_dim = 1;
  net.layers.emplace_back(AffineLayer{AffineMap(mat({{1}, {2}}), vec({0, 0}))});
  net.layers.emplace_back(PointwiseLayer{{ScalarCPWL::relu(), ScalarCPWL::relu()}});
  const auto r = count_knots(net, PolygonalPath::segment(vec({-1}), vec({1})));
  REQUIRE(r.count == 1);
  CHECK(r.knots[0].degenerate);
  CHECK(r.degenerate_count == 1);
}

TEST_CASE("reversal and splitting invariance") {
  std::mt19937_64 rng(41);
  for (const char* fam : {"relu", "deepspline", "maxout", "groupsort"}) {
    for (int t = 0; t < 10; ++t) {
      const auto net = testutil::random_two_hidden(rng, fam, 4, 3);
      const auto path = random_path(rng, 2, 4);
      const auto r = count_knots(net, path);
      CHECK(count_knots(net, path.reversed()).count == r.count);
      // split the first segment at a point away from every knot
      double best = 0.5, gap = 0.0;
      for (double c = 0.1; c < 0.9; c += 0.01) {
        double g = 1e9;
        const double tc = c * path.segment_length(0);
        for (const auto& k : r.knots) g = std::min(g, std::abs(k.t - tc));
        if (g > gap) {
          gap = g;
          best = c;
        }
      }
      PolygonalPath split = path;
      split.vertices.insert(split.vertices.begin() + 1,
                            path.vertices[0] + best * (path.vertices[1] - path.vertices[0]));
      CHECK(count_knots(net, split).count == r.count);
      CHECK(count_knots(net, path, 1).count == count_knots(net, path, 3).count);
    }
  }
}

TEST_CASE("knots match sign changes of sampled pieces") {
  // independent check: on a fine sample, each interval whose end pieces
  // differ must contain at least one knot
  std::mt19937_64 rng(42);
  for (int t = 0; t < 10; ++t) {
    const auto net = testutil::random_two_hidden(rng, "relu", 3, 2);
    const auto path = PolygonalPath::segment(vec({-3, -1}), vec({3, 2}));
    const auto r = count_knots(net, path);
    const int n = 4000;
    std::size_t changes = 0;
    const Vector dir = (path.vertices[1] - path.vertices[0]).normalized();
    auto piece = [&](double s) { return eval_jacobian(net, path.point_at(s), dir).map; };
    AffineMap prev = piece(0.5 * path.length() / n);
    for (int i = 1; i < n; ++i) {
      const AffineMap cur = piece((i + 0.5) * path.length() / n);
      const double scale = std::max(1.0, prev.matrix.cwiseAbs().maxCoeff());
      if ((cur.matrix - prev.matrix).cwiseAbs().maxCoeff() > 1e-7 * scale ||
          std::abs(cur.offset[0] - prev.offset[0]) > 1e-7 * std::max(1.0, std::abs(prev.offset[0]))) {
        ++changes;
      }
      prev = cur;
    }
    CHECK(changes <= r.count);
  }
}

TEST_CASE("image paths and lengths") {
  const PolygonalPath p{{vec({0, 0}), vec({1, 1}), vec({2, 0})}};
  const auto twice = affine_network(AffineMap(2.0 * Matrix::Identity(2, 2), Vector::Zero(2)));
  CHECK(image_length(twice, p) == doctest::Approx(2.0 * p.length()));
  const auto id = affine_network(AffineMap::identity(2));
  CHECK(image_length(id, p) == doctest::Approx(p.length()));
  const auto img = image_path(id, p);
  CHECK(img.vertices.size() == 3);
  const auto relu = scalar_network(ScalarCPWL::relu());
  CHECK(image_length(relu, PolygonalPath::segment(vec({-1}), vec({1}))) == doctest::Approx(1.0));
  // folding: |t| on [-1, 1] has length 2 and turns back at 0
  const auto absn = scalar_network(ScalarCPWL::abs());
  const auto fold = image_path(absn, PolygonalPath::segment(vec({-1}), vec({1})));
  CHECK(fold.length() == doctest::Approx(2.0));
  CHECK(fold.vertices.size() == 3);
}

TEST_CASE("subadditivity and composition checks") {
  const auto id = affine_network(AffineMap::identity(1));
  const auto seg = PolygonalPath::segment(vec({-1}), vec({1}));
  const auto trivial = check_subadditivity(id, id, seg);
  CHECK(trivial.pass());
  CHECK(trivial.sum.lhs_knots == 0);
  const auto relu = scalar_network(ScalarCPWL::relu());
  const auto shifted = scalar_network(ScalarCPWL({0.5}, {-1, 1}, 0.0));
  const auto rep = check_subadditivity(relu, shifted, seg);
  CHECK(rep.sum.lhs_knots == 2);
  CHECK(rep.sum.rhs_knots == 2);
  CHECK(rep.stacked.lhs_knots == 2);
  CHECK(rep.pass());
  // relu + (-relu) cancels
  const auto neg = scalar_network(ScalarCPWL({0.0}, {0, -1}, 0.0));
  CHECK(count_knots_pair(relu, neg, seg, false).count == 0);
  CHECK(count_knots_pair(relu, neg, seg, true).count == 1);
  const auto comp = check_composition_bound(scalar_network(sawtooth(3)), scalar_network(sawtooth(4)),
                                            PolygonalPath::segment(vec({0}), vec({1})));
  CHECK(comp.lhs_knots == 11);
  CHECK(comp.pass);
  CHECK_THROWS_AS(check_composition_bound(two_relus(), two_relus(), PolygonalPath::segment(vec({0, 0}), vec({1, 1}))),
                  std::invalid_argument);
}

TEST_CASE("random inequality instances") {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 40; ++t) {
    const char* fams[] = {"relu", "deepspline", "maxout", "groupsort"};
    const auto f1 = testutil::random_two_hidden(rng, fams[t % 4], 4, 3);
    const auto f2 = testutil::random_two_hidden(rng, fams[(t + 1) % 4], 4, 3);
    const auto g = testutil::random_two_hidden(rng, fams[(t + 2) % 4], 4, 3, 1);
    const auto path = random_path(rng, 2, 3);
    CHECK(check_subadditivity(f1, f2, path).pass());
    CHECK(check_composition_bound(f1, g, path).pass);
  }
}
