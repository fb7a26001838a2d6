// SPDX-License-Identifier: Apache-2.0
//
// Brute-force verifiers: region and knot counts from fingerprints of the
// one-sided local affine map sampled on a grid. They undercount at finite
// resolution and never define correctness.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cpwl/core.hpp"
#include "cpwl/geometry.hpp"

namespace cpwl {

/// Relative rounding applied to Jacobian and offset entries.
inline constexpr double kFingerprintRounding = 1e-6;

struct GridCount {
  std::size_t resolution = 0;
  std::size_t distinct = 0;    // distinct fingerprints
  std::size_t components = 0;  // 4-connected components of equal fingerprints
  /// row-major fingerprint ids (resolution^dim entries)
  std::vector<std::size_t> ids;
};

/// Samples pixel centers of a resolution^d grid over [lo, hi] (d = 1 or 2)
/// and fingerprints the local affine map on the side of a fixed generic
/// direction. Throws std::invalid_argument for other input dimensions or
/// resolution < 8.
GridCount grid_region_count(const NetworkSpec& net, const Vector& lo, const Vector& hi,
                            std::size_t resolution, std::size_t threads = 0);

/// Fingerprint changes between consecutive sample points at the centers of
/// `resolution` equal parts of the segment [a, b].
std::size_t grid_knot_count(const NetworkSpec& net, const Vector& a, const Vector& b,
                            std::size_t resolution, std::size_t threads = 0);

/// Smallest inradius certificate over the cells of `rs`; the oracle sees
/// every piece when this exceeds two pixel widths.
double min_cell_radius(const RegionSet& rs);

}  // namespace cpwl
