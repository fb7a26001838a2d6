// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cpwl/bounds.hpp"
#include "test_util.hpp"

using namespace cpwl;

TEST_CASE("integer helpers") {
  CHECK(binomial(10, 3) == 120);
  CHECK(binomial(3, 5) == 0);
  CHECK(factorial(5) == 120);
  CHECK(ipow(BigInt(3), 4) == 81);
  // exceeds 64 bits
  CHECK(to_string(ipow(BigInt(2), 100)) == "1267650600228229401496703205376");
}

TEST_CASE("beta agrees with subset enumeration") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> n(1, 6), len(1, 8), dd(1, 5);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::size_t> ns(len(rng));
    for (auto& v : ns) v = n(rng);
    const std::size_t d = dd(rng);
    CHECK(beta(d, ns) == testutil::beta_oracle(d, ns));
  }
  CHECK(beta(2, {3, 3}) == 9);
  CHECK(beta(1, {3, 3}) == 5);
}

TEST_CASE("beta structural properties") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> n(1, 6), len(1, 6), dd(1, 5);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> ns(len(rng));
    for (auto& v : ns) v = n(rng);
    const std::size_t d = dd(rng);
    // product when N <= d
    if (ns.size() <= d) {
      BigInt prod = 1;
      for (auto v : ns) prod *= v;
      CHECK(beta(d, ns) == prod);
    }
    // symmetry
    auto shuffled = ns;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(beta(d, shuffled) == beta(d, ns));
    // monotone in each entry and in d
    auto bigger = ns;
    bigger[t % bigger.size()] += 1;
    CHECK(beta(d, bigger) >= beta(d, ns));
    CHECK(beta(d + 1, ns) >= beta(d, ns));
  }
}

TEST_CASE("hyperplane specialization") {
  for (std::size_t d = 1; d <= 8; ++d) {
    for (std::size_t N = 1; N <= 8; ++N) {
      unsigned long long s = 0;
      for (std::size_t k = 0; k <= std::min(d, N); ++k) s += testutil::choose(N, k);
      CHECK(beta(d, std::vector<std::size_t>(N, 2)) == s);
    }
  }
}

TEST_CASE("simplified caps and projection cap") {
  for (std::size_t d = 1; d <= 4; ++d) {
    for (std::size_t N = 1; N <= 5; ++N) {
      for (std::size_t n = 2; n <= 4; ++n) {
        const auto [a, b] = beta_simplified(d, N, n);
        const BigInt v = beta(d, std::vector<std::size_t>(N, n));
        CHECK(v <= a);
        CHECK(v <= b);
      }
    }
  }
  CHECK(projection_to_convex_cap(1, 2) == 1);
  CHECK(projection_to_convex_cap(2, 2) == 2);
  CHECK(projection_to_convex_cap(3, 2) == 7);  // three lines in the plane
}

TEST_CASE("descriptor validation") {
  ArchitectureDescriptor a;
  a.dims = {2, 3};
  a.kappas = {{2, 2}};
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a.kappas = {{2, 0, 2}};
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  const auto u = ArchitectureDescriptor::uniform({3, 5, 4, 2}, 3);
  CHECK(u.depth() == 3);
  CHECK(u.width() == 5);
  CHECK(u.d_star() == 2);
}

TEST_CASE("alpha variants on worked instances") {
  const auto arch = corollary_family(1, 4, 1, 3, 2);
  CHECK(alpha_lower_paper(arch).value == 512);
  CHECK(alpha_lower_constructive(arch).value == 125);
  CHECK(compositional_upper(arch).value == 125);
  // one unit per layer: both variants give the product of kappas
  ArchitectureDescriptor single;
  single.dims = {1, 1, 1, 1};
  single.kappas = {{3}, {4}, {5}};
  CHECK(alpha_lower_paper(single).value == 60);
  CHECK(alpha_lower_constructive(single).value == 60);
  // dims (1,2,1), kappa 2: sw_3 then sw_2
  const auto small = ArchitectureDescriptor::uniform({1, 2, 1}, 2);
  CHECK(alpha_lower_constructive(small).value == 6);
}

TEST_CASE("constructive lower bound never exceeds the upper bound") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 5), depth(1, 4), kap(1, 5);
  for (int t = 0; t < 10000; ++t) {
    ArchitectureDescriptor a;
    const std::size_t L = depth(rng);
    a.dims.push_back(dim(rng));
    for (std::size_t l = 0; l < L; ++l) {
      a.dims.push_back(dim(rng));
      std::vector<std::size_t> k(a.dims.back());
      for (auto& v : k) v = kap(rng);
      a.kappas.push_back(k);
    }
    const auto lo = alpha_lower_constructive(a);
    REQUIRE(lo.value <= compositional_upper(a).value);
    REQUIRE(lo.tau.size() == L);
  }
}

TEST_CASE("uniform-family envelope") {
  const auto e = corollary_envelope(1, 4, 1, 3, 2);
  CHECK(e.lower_paper == 512);
  // (kappa W)^(L d_in) = 8^3
  CHECK(e.upper == 512);
  CHECK(corollary_envelope(2, 3, 2, 2, 1).lower_paper == 1);
  CHECK(corollary_envelope(2, 3, 2, 2, 1).upper == ipow(BigInt(3), 4));
  CHECK_THROWS_AS(corollary_envelope(3, 2, 1, 1, 2), std::invalid_argument);
  CHECK_FALSE(corollary_envelope(1, 2, 3, 1, 2).warnings.empty());
  for (std::size_t din = 1; din <= 3; ++din) {
    for (std::size_t W = din; W <= 5; ++W) {
      for (std::size_t L = 1; L <= 3; ++L) {
        for (std::size_t k = 1; k <= 3; ++k) {
          const auto env = corollary_envelope(din, W, 1, L, k);
          CHECK(env.upper >= compositional_upper(corollary_family(din, W, 1, L, k)).value);
        }
      }
    }
  }
}

TEST_CASE("worked formulas") {
  CHECK(architecture_bound("ridge", {{"d", 2}, {"N", 3}}).value == 7);
  CHECK(architecture_bound("maxpool", {{"d", 2}, {"dprime", 3}, {"N", 2}}).value == 7);
  // ghh d=2, N=2: 1 + 2*2 + 1*4
  CHECK(architecture_bound("ghh", {{"d", 2}, {"N", 2}}).value == 9);
  const auto gs = architecture_bound("groupsort_activation", {{"d", 4}, {"gs", 2}});
  CHECK(gs.value == 4);
  CHECK(gs.envelope_lower == 1);
  CHECK(gs.envelope_upper == 16);
  CHECK(architecture_bound("sort", {{"d", 3}}).value == 6);
  CHECK(architecture_bound("pwlu_unit", {{"M", 4}}).value == 18);
  CHECK(architecture_bound("pwlu_layer", {{"d", 2}, {"N", 1}, {"M", 4}}).value == 18);
  CHECK_THROWS_AS(architecture_bound("groupsort_activation", {{"d", 3}, {"gs", 2}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(architecture_bound("ridge", {{"d", 2}}), std::invalid_argument);
  CHECK_THROWS_AS(architecture_bound("nope", {}), std::invalid_argument);
  // relu dims (2,8,8,1): (1+8+28)^2 * (1+1) = 2738
  CHECK(architecture_bound("relu", {}, {2, 8, 8, 1}).value == 2738);
}

TEST_CASE("upper bound specializes to the deep-network formulas") {
  std::mt19937_64 rng(8);
  for (std::size_t W = 2; W <= 6; ++W) {
    const std::vector<std::size_t> dims{2, W, W};
    CHECK(compositional_upper(ArchitectureDescriptor::uniform(dims, 2)).value ==
          architecture_bound("relu", {}, dims).value);
    for (std::size_t k = 2; k <= 4; ++k) {
      const auto v = compositional_upper(ArchitectureDescriptor::uniform(dims, k)).value;
      CHECK(v == architecture_bound("deepspline", {{"kappa", k}}, dims).value);
      CHECK(v == architecture_bound("maxout", {{"kappa", k}}, dims).value);
    }
    if (W % 2 == 0) {
      const NetworkSpec net = testutil::random_two_hidden(rng, "groupsort", W, 2);
      auto arch = descriptor_from_network(net);
      CHECK(compositional_upper(arch).value ==
            architecture_bound("groupsort", {{"gs", 2}}, {2, W, W}).value);
    }
  }
}

TEST_CASE("descriptor read off a network") {
  std::mt19937_64 rng(9);
  const NetworkSpec net = testutil::random_two_hidden(rng, "deepspline", 3, 4);
  const auto a = descriptor_from_network(net);
  CHECK(a.dims == std::vector<std::size_t>{2, 3, 3, 1});
  CHECK(a.kappas[0] == std::vector<std::size_t>{4, 4, 4});
  CHECK(a.kappas[2] == std::vector<std::size_t>{1});
  const auto m = descriptor_from_network(testutil::random_two_hidden(rng, "maxout", 2, 3));
  CHECK(m.kappas[1] == std::vector<std::size_t>{3, 3});
}
