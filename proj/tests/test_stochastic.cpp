// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cpwl/random.hpp"
#include "cpwl/stochastic.hpp"
#include "test_util.hpp"

using namespace cpwl;
using testutil::vec;

TEST_CASE("init spec") {
  InitSpec s;
  CHECK(s.sup_bias_density() == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  s.bias_dist = Distribution::uniform;
  s.sigma_b = 2.0;
  CHECK(s.sup_bias_density() == doctest::Approx(1.0 / (4.0 * std::sqrt(3.0))));
  s.fan_in_scaling = true;
  CHECK(s.weight_sigma(8) == doctest::Approx(0.5));
  s.sigma_w = -1.0;
  s.fan_in_scaling = false;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(parse_distribution("uniform") == Distribution::uniform);
  CHECK(to_string(Distribution::normal) == "normal");
  CHECK_THROWS_AS(parse_distribution("cauchy"), std::invalid_argument);
}

TEST_CASE("draws have the requested variance") {
  for (auto dist : {Distribution::normal, Distribution::uniform}) {
    Rng rng(5);
    double s = 0.0, s2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double x = draw(dist, 1.5, rng);
      s += x;
      s2 += x * x;
    }
    CHECK(s / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(s2 / n == doctest::Approx(2.25).epsilon(0.03));
  }
}

TEST_CASE("sampled networks") {
  const auto arch = ArchitectureDescriptor::uniform({3, 5, 5, 1}, 2, "relu");
  InitSpec init;
  init.sigma_w = 0.7;
  const auto a = sample_network(arch, init, 11);
  const auto b = sample_network(arch, init, 11);
  const auto c = sample_network(arch, init, 12);
  const Vector x = vec({0.1, -0.4, 0.9});
  CHECK(eval(a, x) == eval(b, x));
  CHECK(eval(a, x) != eval(c, x));
  CHECK(a.output_dim() == 1);
  // empirical weight variance over many first-layer weights
  const auto wide = ArchitectureDescriptor::uniform({100, 100}, 2, "relu");
  const auto w = sample_network(wide, init, 3);
  const auto& m = std::get<AffineLayer>(w.layers[0]).map.matrix;
  const double var = m.array().square().mean();
  CHECK(var == doctest::Approx(0.49).epsilon(0.05));
  // kappa 1 deepspline layers are affine
  const auto lin = ArchitectureDescriptor::uniform({2, 3, 1}, 1, "deepspline");
  const auto net = sample_network(lin, init, 4);
  const Vector p = vec({0.3, 0.2}), q = vec({-1.0, 2.0});
  CHECK((eval(net, 0.5 * (p + q)) - 0.5 * (eval(net, p) + eval(net, q))).norm() < 1e-12);
  for (const char* fam : {"leaky", "abs", "maxout", "groupsort"}) {
    const auto ar = ArchitectureDescriptor::uniform({4, 4, 4}, 2, fam);
    CHECK(sample_network(ar, init, 1).output_dim() == 4);
  }
  CHECK_THROWS_AS(sample_network(ArchitectureDescriptor::uniform({2, 2}, 2, "tanh"), init, 1),
                  std::invalid_argument);
}

TEST_CASE("closed-form unit bounds") {
  InitSpec n;
  CHECK(unit_density_bound("relu", {}, n) == doctest::Approx(1.0 / std::numbers::pi));
  CHECK(unit_density_bound("maxout", {{"K", 3}}, n) == doctest::Approx(3.0 * std::sqrt(2.0) / std::numbers::pi));
  CHECK(unit_density_bound("groupsort", {{"d", 4}, {"gs", 2}}, n) ==
        doctest::Approx(2.0 * std::sqrt(2.0) / std::numbers::pi));
  InitSpec u;
  u.weight_dist = Distribution::uniform;
  u.bias_dist = Distribution::uniform;
  CHECK(unit_density_bound("relu", {}, u) == doctest::Approx(1.0 / (2.0 * std::sqrt(3.0))));
  CHECK_THROWS_AS(unit_density_bound("sigmoid", {}, n), std::invalid_argument);
}

TEST_CASE("summaries") {
  const auto e = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(e.mean == doctest::Approx(2.5));
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(e.trials == 4);
  CHECK_THROWS_AS(summarize({1.0}), std::invalid_argument);
}

TEST_CASE("probe segments") {
  const auto p = probe_segment(4, 10.0, 7);
  CHECK(p.length() == doctest::Approx(10.0));
  CHECK((p.vertices[0] + p.vertices[1]).norm() < 1e-12);
  InitSpec s;
  s.sigma_b = 2.0;
  s.sigma_w = 0.5;
  CHECK(default_probe_length(s, 1) == doctest::Approx(40.0));
}

TEST_CASE("affine networks have zero knot density") {
  const NetworkSampler nets = [](std::uint64_t seed) {
    Rng rng(seed);
    return affine_network(AffineMap(testutil::random_matrix(rng, 2, 3), testutil::random_vector(rng, 2)));
  };
  const PathSampler paths = [](std::uint64_t seed) { return probe_segment(3, 10.0, seed); };
  const auto e = mc_knot_density(nets, paths, 100, 1);
  CHECK(e.mean == 0.0);
  CHECK(e.se == 0.0);
}

TEST_CASE("single units stay below their bounds") {
  InitSpec init;
  for (const auto& [fam, k] : std::vector<std::pair<std::string, std::size_t>>{{"relu", 2}, {"maxout", 2}, {"maxout", 3}}) {
    const auto arch = ArchitectureDescriptor::uniform({4, 1}, k, fam);
    const auto e = mc_knot_density(arch, init, 4000, 9, 10.0);
    REQUIRE(std::isfinite(e.bound));
    CHECK(e.mean <= e.bound + 3.0 * e.se);
  }
  const auto gs = ArchitectureDescriptor::uniform({4, 4}, 2, "groupsort");
  const auto e = mc_knot_density(gs, init, 4000, 9, 10.0);
  CHECK(e.bound == doctest::Approx(2.0 * std::sqrt(2.0) / std::numbers::pi));
  CHECK(e.mean <= e.bound + 3.0 * e.se);
}

TEST_CASE("results do not depend on the thread count") {
  const auto arch = ArchitectureDescriptor::uniform({2, 4, 4, 1}, 2, "abs");
  InitSpec init;
  init.fan_in_scaling = true;
  const auto a = mc_knot_density(arch, init, 200, 5, 0.0, 1);
  const auto b = mc_knot_density(arch, init, 200, 5, 0.0, 3);
  CHECK(a.values == b.values);
  CHECK(a.mean == b.mean);
  const auto d1 = estimate_directional_expansion(arch, init, 200, 5, 1);
  const auto d2 = estimate_directional_expansion(arch, init, 200, 5, 4);
  CHECK(d1.values == d2.values);
}

TEST_CASE("directional expansion of linear maps") {
  const PolygonalPath seg = probe_segment(3, 4.0, 1);
  const NetworkSampler ident = [](std::uint64_t) { return affine_network(AffineMap::identity(3)); };
  CHECK(estimate_directional_expansion(ident, 3, 4.0, 100, 1).mean == doctest::Approx(1.0));
  const NetworkSampler twice = [](std::uint64_t) {
    return affine_network(AffineMap(2.0 * Matrix::Identity(3, 3), Vector::Zero(3)));
  };
  CHECK(estimate_directional_expansion(twice, 3, 4.0, 100, 1).mean == doctest::Approx(2.0));
  CHECK(mc_image_length(twice, seg, 100, 1).mean == doctest::Approx(8.0));
  CHECK(mc_image_length(ident, seg, 100, 1).mean == doctest::Approx(4.0));
  // abs after a random orthogonal map: the norm is preserved for generic inputs
  const NetworkSampler orth = [](std::uint64_t seed) {
    Rng rng(seed);
    const Matrix q = Eigen::HouseholderQR<Matrix>(testutil::random_matrix(rng, 3, 3)).householderQ();
    NetworkSpec n = affine_network(AffineMap(q, Vector::Zero(3)));
    n.layers.emplace_back(PointwiseLayer{std::vector<ScalarCPWL>(3, ScalarCPWL::abs())});
    return n;
  };
  CHECK(estimate_directional_expansion(orth, 3, 4.0, 200, 2).mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("image length is bounded by the expansion") {
  const auto arch = ArchitectureDescriptor::uniform({2, 6}, 2, "relu");
  InitSpec init;
  const auto seg = probe_segment(2, 10.0, 3);
  const NetworkSampler nets = [&](std::uint64_t s) { return sample_network(arch, init, s); };
  const auto len = mc_image_length(nets, seg, 500, 4);
  const auto d0 = estimate_directional_expansion(arch, init, 2000, 5);
  CHECK(len.mean <= seg.length() * (d0.mean + 3.0 * d0.se) + 3.0 * len.se);
}

TEST_CASE("compositional density bound") {
  const auto one = compositional_density_bound(0.5, 1.0, 4, 3);
  CHECK(one.geometric == doctest::Approx(6.0));
  CHECK(one.corollary == doctest::Approx(6.0));
  // D0 = 0.5 saturates at 2 lambda0 W
  const auto sat = compositional_density_bound(0.5, 0.5, 4, 200);
  CHECK(sat.geometric == doctest::Approx(4.0));
  CHECK(sat.corollary == doctest::Approx(400.0));
  const auto l1 = compositional_density_bound(0.3, 2.0, 5, 1);
  CHECK(l1.geometric == doctest::Approx(1.5));
  CHECK(l1.corollary == doctest::Approx(3.0));
  CHECK_THROWS_AS(compositional_density_bound(-1.0, 1.0, 1, 1), std::invalid_argument);
}

TEST_CASE("unit density estimate stays below the relu bound") {
  const auto arch = ArchitectureDescriptor::uniform({3, 3, 3}, 2, "relu");
  InitSpec init;
  const auto e = estimate_unit_density(arch, init, 2000, 6);
  CHECK(e.by_depth.size() == 2);
  CHECK(e.mean <= unit_density_bound("relu", {}, init) + 3.0 * e.se);
  const auto le = estimate_layer_expansion(arch, init, 500, 7);
  CHECK(le.mean > 0.0);
}
