// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cpwl/constructions.hpp"
#include "cpwl/geometry.hpp"
#include "test_util.hpp"

using namespace cpwl;
using testutil::vec;

TEST_CASE("sawtooth values and region counts") {
  for (std::size_t p = 1; p <= 16; ++p) {
    const ScalarCPWL s = sawtooth(p);
    CHECK(s.region_count() == p);
    for (std::size_t k = 0; k <= p; ++k) {
      const double expect = (k % 2 == 0) ? 0.0 : 1.0;
      CHECK(s(static_cast<double>(k) / static_cast<double>(p)) == doctest::Approx(expect));
    }
  }
  CHECK(sawtooth(1) == ScalarCPWL());
  CHECK(sawtooth(4)(0.25) == doctest::Approx(1.0));
}

TEST_CASE("sawtooth composition law") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (std::size_t p = 1; p <= 6; ++p) {
    for (std::size_t q = 1; q <= 6; ++q) {
      const ScalarCPWL c = compose_scalar(sawtooth(q), sawtooth(p));
      CHECK(c.region_count() == p * q);
      CHECK(c.approx_equal(sawtooth(p * q)));
    }
  }
}

TEST_CASE("sawtooth decomposition re-sums") {
  CHECK(sawtooth_decompose(1).knots.empty());
  CHECK(sawtooth_decompose(2).knots.size() == 1);
  CHECK(sawtooth_decompose(4).coefficients.size() == 3);
  for (std::size_t p = 1; p <= 12; ++p) {
    const auto dec = sawtooth_decompose(p);
    CHECK(dec.knots.size() == p - 1);
    CHECK(dec.resum().approx_equal(sawtooth(p)));
    for (std::size_t j = 0; j < dec.knots.size(); ++j) CHECK(dec.term(j).knot_count() == 1);
  }
}

TEST_CASE("sawtooth composition network enumerates p q cells") {
  for (std::size_t p = 2; p <= 6; ++p) {
    for (std::size_t q = 2; q <= 6; ++q) {
      const NetworkSpec net = sawtooth_composition(p, q);
      CHECK(enumerate_regions(net).regions.size() == p * q);
    }
  }
}

TEST_CASE("sawtooth network realizes the constructive lower bound") {
  const auto small = ArchitectureDescriptor::uniform({1, 2, 1}, 2);
  CHECK(enumerate_regions(sawtooth_network(small)).regions.size() == 6);
  const auto flat = ArchitectureDescriptor::uniform({2, 3, 2}, 1);
  CHECK(enumerate_regions(sawtooth_network(flat)).regions.size() == 1);
  const auto audit = corollary_family(1, 4, 1, 3, 2);
  CHECK(enumerate_regions(sawtooth_network(audit)).regions.size() == 125);
  // explicit tau: all units of a layer in one group
  const auto two = ArchitectureDescriptor::uniform({2, 2, 2}, 3);
  const TauAssignment tau{{0, 1}, {1, 0}};
  CHECK(enumerate_regions(sawtooth_network(two, tau)).regions.size() == 81);
  ArchitectureDescriptor mx = ArchitectureDescriptor::uniform({1, 2, 1}, 2, "maxout");
  CHECK_THROWS_AS(sawtooth_network(mx), std::invalid_argument);
}

TEST_CASE("general position partitions reach beta") {
  CHECK(enumerate_regions(general_position_partitions(2, {3, 3})).regions.size() == 9);
  CHECK(enumerate_regions(general_position_partitions(1, {3, 3})).regions.size() == 5);
  CHECK(enumerate_regions(general_position_partitions(2, {2, 2, 2})).regions.size() == 7);
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<std::size_t> n(2, 4), len(1, 4), dd(1, 3);
  for (int t = 0; t < 25; ++t) {
    std::vector<std::size_t> ns(len(rng));
    std::size_t knots = 0;
    for (auto& v : ns) {
      v = n(rng);
      knots += v - 1;
    }
    if (knots > 12) continue;
    const std::size_t d = dd(rng);
    const auto net = general_position_partitions(d, ns, 100 + static_cast<std::uint64_t>(t));
    CHECK(BigInt(enumerate_regions(net).regions.size()) == beta(d, ns));
  }
}

TEST_CASE("general position is deterministic in the seed") {
  const auto a = general_position_partitions(2, {3, 4}, 7);
  const auto b = general_position_partitions(2, {3, 4}, 7);
  const Vector x = vec({0.3, -0.1});
  CHECK(eval(a, x) == eval(b, x));
}

TEST_CASE("extremal sum gives distinct pieces on every cell") {
  const auto one = extremal_sum_network(1, {2, 2});
  CHECK(count_report(enumerate_regions(one), one).distinct_piece_count == 3);
  const auto two = extremal_sum_network(2, {3, 3});
  CHECK(count_report(enumerate_regions(two), two).distinct_piece_count == 9);
  const auto single = extremal_sum_network(2, {4});
  CHECK(count_report(enumerate_regions(single), single).distinct_piece_count == 4);
  const auto three = extremal_sum_network(2, {3, 3, 2});
  const auto rep = count_report(enumerate_regions(three), three);
  CHECK(BigInt(rep.distinct_piece_count) == beta(2, {3, 3, 2}));
  CHECK(rep.distinct_piece_count == rep.cell_count);
  CHECK(three.output_dim() == 1);
}
