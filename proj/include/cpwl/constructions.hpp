// SPDX-License-Identifier: Apache-2.0
//
// Extremal constructions: sawtooth functions and networks, general-position
// arrangements of parallel-class partitions, and sums with distinct slopes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cpwl/bounds.hpp"
#include "cpwl/core.hpp"

namespace cpwl {

/// sw_p: p pieces with knots at k/p, alternating between 0 and 1 on the
/// grid, extended affinely outside [0, 1]. sawtooth(1) is the identity.
ScalarCPWL sawtooth(std::size_t p);

/// sw_p = sum_j coefficients[j] * |t - knots[j]| + slope * t + intercept,
/// with p - 1 one-knot terms.
struct SawtoothDecomposition {
  std::vector<double> knots;
  std::vector<double> coefficients;
  double slope = 0.0;
  double intercept = 0.0;

  /// The one-knot term j as a function.
  ScalarCPWL term(std::size_t j) const;
  ScalarCPWL remainder() const { return ScalarCPWL::affine(slope, intercept); }
  /// Sum of all terms and the remainder.
  ScalarCPWL resum() const;
};

SawtoothDecomposition sawtooth_decompose(std::size_t p);

/// tau[l][k] = coordinate group of unit k in layer l.
using TauAssignment = std::vector<std::vector<std::size_t>>;

/// Deep network whose cell count is
///   prod_l prod_r (1 + sum_{k in group r of layer l} (kappa_{l,k} - 1)).
/// Layer l is an affine map followed by pointwise units; group r carries a
/// sawtooth of the input coordinate r, split across its units. When `tau`
/// is absent the maximizer from alpha_lower_constructive is used.
/// Throws std::invalid_argument for non-pointwise families.
NetworkSpec sawtooth_network(const ArchitectureDescriptor& arch,
                             const std::optional<TauAssignment>& tau = std::nullopt);

/// One-input network computing sw_q o sw_p.
NetworkSpec sawtooth_composition(std::size_t p, std::size_t q);

/// One hidden layer, N = ns.size() outputs: unit k applies a function with
/// ns[k] - 1 knots (random in [-1, 1]) to w_k . x with random unit
/// directions in general position. Redraws directions whose d-subsets are
/// nearly dependent (|det| <= 0.05); throws after too many attempts.
NetworkSpec general_position_partitions(std::size_t d, const std::vector<std::size_t>& ns,
                                        std::uint64_t seed = 1);

/// Same arrangement, scalar output = sum of the units; unit k has slope
/// p * m^(k-1) on its p-th piece with m = max(ns), so every cell carries a
/// distinct affine piece.
NetworkSpec extremal_sum_network(std::size_t d, const std::vector<std::size_t>& ns,
                                 std::uint64_t seed = 1);

}  // namespace cpwl
