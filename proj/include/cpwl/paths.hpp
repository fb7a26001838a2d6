// SPDX-License-Identifier: Apache-2.0
//
// Exact knot counting along polygonal paths: the restriction of a network to
// each path segment is propagated layer by layer as a list of parameter
// intervals, each carrying the network's local affine map.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cpwl/core.hpp"

namespace cpwl {

/// A polygonal chain through `vertices`, parameterized by arc length.
struct PolygonalPath {
  std::vector<Vector> vertices;

  std::size_t dim() const { return vertices.empty() ? 0 : static_cast<std::size_t>(vertices[0].size()); }
  std::size_t segments() const { return vertices.empty() ? 0 : vertices.size() - 1; }
  double segment_length(std::size_t i) const { return (vertices[i + 1] - vertices[i]).norm(); }
  double length() const;
  /// Point at arc length t (clamped to the path).
  Vector point_at(double t) const;
  PolygonalPath reversed() const;
  /// Throws std::invalid_argument unless there are >= 2 vertices of one
  /// dimension and consecutive vertices are distinct.
  void validate() const;

  static PolygonalPath segment(const Vector& a, const Vector& b) { return {{a, b}}; }
};

/// Relative tolerance of the one-sided piece comparison that defines a knot.
inline constexpr double kKnotTol = 1e-9;

struct Knot {
  double t = 0.0;            // arc length from the start of the path
  std::size_t segment = 0;   // a knot at a vertex belongs to the earlier segment
  long layer = -1;           // first layer whose active piece changes (-1: unknown)
  bool at_vertex = false;
  bool degenerate = false;   // several units switch at the same parameter
};

struct KnotReport {
  std::vector<Knot> knots;
  std::size_t count = 0;
  double length = 0.0;
  double density = 0.0;
  std::size_t degenerate_count = 0;
};

/// Knots of net o path: parameters where the network's active affine piece
/// (Jacobian and offset in input space) differs on the two sides by more
/// than kKnotTol relative.
KnotReport count_knots(const NetworkSpec& net, const PolygonalPath& path,
                       std::size_t threads = 0);

/// Knots of x -> f1(x) + f2(x) (`stacked` false) or x -> (f1(x), f2(x)).
KnotReport count_knots_pair(const NetworkSpec& f1, const NetworkSpec& f2,
                            const PolygonalPath& path, bool stacked,
                            std::size_t threads = 0);

/// The path net o path with a vertex at every piece boundary (repeated
/// consecutive points dropped, so it may have fewer than 2 vertices).
PolygonalPath image_path(const NetworkSpec& net, const PolygonalPath& path);
/// Exact length of net o path.
double image_length(const NetworkSpec& net, const PolygonalPath& path);

/// One inequality lhs <= rhs between knot counts on a common path; the
/// densities are the counts divided by the path length.
struct InequalityCheck {
  std::string name;
  std::size_t lhs_knots = 0;
  std::size_t rhs_knots = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Sum and stacking subadditivity: kt(f1 + f2) <= kt(f1) + kt(f2) and
/// kt((f1, f2)) <= kt(f1) + kt(f2).
struct SubadditivityReport {
  InequalityCheck sum;
  InequalityCheck stacked;
  bool pass() const { return sum.pass && stacked.pass; }
};
SubadditivityReport check_subadditivity(const NetworkSpec& f1, const NetworkSpec& f2,
                                        const PolygonalPath& path);

/// kt(f2 o f1 along path) <= kt(f1 along path) + kt(f2 along f1 o path);
/// divided by len(path) this is the density form with the length ratio.
InequalityCheck check_composition_bound(const NetworkSpec& f1, const NetworkSpec& f2,
                                        const PolygonalPath& path);

}  // namespace cpwl
