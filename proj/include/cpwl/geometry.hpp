// SPDX-License-Identifier: Apache-2.0
//
// Enumeration of the convex cells of a CPWL network by recursive polyhedral
// subdivision, piece statistics, and 2D rendering.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpwl/bounds.hpp"
#include "cpwl/core.hpp"

namespace cpwl {

/// {x : normal . x + offset >= 0}
struct HalfSpace {
  Vector normal;
  double offset = 0.0;

  double eval(const Vector& x) const { return normal.dot(x) + offset; }
};

/// Input domain: the whole space (handled through an artificial box of
/// half-width r_max) or an explicit axis-aligned box.
struct Domain {
  bool bounded = false;
  Vector lo;
  Vector hi;

  static Domain unbounded() { return Domain{}; }
  static Domain box(Vector lo, Vector hi);
  /// [a, b]^dim
  static Domain cube(std::size_t dim, double a, double b);
};

struct GeometryConfig {
  double r_max = 1e6;
  double eps_interior = 1e-7;
  /// Relative tolerance for identifying two affine pieces.
  double piece_tol = 1e-9;
  std::size_t max_cells = 1000000;
  std::size_t max_input_dim = 8;
  /// 0 = hardware concurrency.
  std::size_t threads = 0;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Region {
  std::vector<HalfSpace> constraints;
  AffineMap piece;
  Vector witness;
  /// Chebyshev-style inradius certificate from the interior LP.
  double radius = 0.0;
  /// Flattened activation pattern (layer by layer piece choices).
  std::vector<int> pattern;

  bool contains(const Vector& x, double tol = 1e-9) const;
};

struct RegionSet {
  std::size_t input_dim = 0;
  std::vector<Region> regions;
  Domain domain;
  GeometryConfig config;
};

struct WitnessResult {
  enum class Status { interior, degenerate, empty };
  Status status = Status::empty;
  Vector point;
  double epsilon = 0.0;

  bool ok() const { return status == Status::interior; }
};

/// Chebyshev-center LP: maximize e subject to a_i.x + c_i >= e ||a_i|| for
/// every constraint and the domain box (with margin). Interior iff
/// e* > cfg.eps_interior.
WitnessResult interior_witness(const std::vector<HalfSpace>& constraints,
                               std::size_t dim, const Domain& domain,
                               const GeometryConfig& cfg = {});

/// Extremes of objective . x over the constraints and domain box.
/// Returns nullopt when the set is empty.
std::optional<std::pair<double, double>> linear_range(
    const std::vector<HalfSpace>& constraints, const Vector& objective,
    const Domain& domain, const GeometryConfig& cfg = {});

/// All convex cells on which the network is affine. Throws BudgetExceeded
/// when the cell count exceeds cfg.max_cells and std::invalid_argument when
/// the input dimension exceeds cfg.max_input_dim.
RegionSet enumerate_regions(const NetworkSpec& net, const Domain& domain = Domain::unbounded(),
                            const GeometryConfig& cfg = {});

/// Cell and distinct piece counts computed in exact rational arithmetic.
/// Network parameters are taken as the exact rationals of their doubles.
struct ExactCount {
  std::size_t cells = 0;
  std::size_t distinct_pieces = 0;
};
ExactCount enumerate_regions_exact(const NetworkSpec& net,
                                   const Domain& domain = Domain::unbounded(),
                                   const GeometryConfig& cfg = {});

struct CountReport {
  std::size_t cell_count = 0;
  std::size_t distinct_piece_count = 0;
  std::size_t connected_piece_count = 0;
  BigInt compositional_upper = 1;
  std::vector<BigInt> upper_factors;
};

/// Cluster id of each region's piece (equal ids = same affine piece).
std::vector<std::size_t> piece_clusters(const RegionSet& rs, std::size_t* count = nullptr);

/// True when regions a and b share a (d-1)-dimensional face.
bool regions_adjacent(const Region& a, const Region& b, std::size_t dim,
                      const Domain& domain, const GeometryConfig& cfg);

CountReport count_report(const RegionSet& rs, const NetworkSpec& net);

struct SvgStyle {
  double width = 480.0;
  double height = 480.0;
  bool annotate = true;
  bool draw_edges = true;
};

/// Region map over [lo, hi] (2D only); every nonempty clipped cell becomes
/// one <polygon>. Throws std::invalid_argument for non-2D sets.
std::string render_svg(const RegionSet& rs, const Vector& lo, const Vector& hi,
                       const SvgStyle& style = {});

/// Convex polygon of `region` clipped to the box (vertices in order, may be
/// empty).
std::vector<Vector> clip_region(const Region& region, const Vector& lo, const Vector& hi);

}  // namespace cpwl
