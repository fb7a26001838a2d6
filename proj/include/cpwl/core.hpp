// SPDX-License-Identifier: Apache-2.0
//
// Continuous piecewise-linear (CPWL) network description and evaluation.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace cpwl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a network description is dimensionally inconsistent or an
/// input does not match it. `layer()` is the index of the offending layer
/// (or `npos` when the problem is not tied to a layer).
class SpecError : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  SpecError(std::size_t layer, const std::string& what);
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// Breakpoints closer than this (relative to max(1,|t|)) are merged.
inline constexpr double kBreakpointTol = 1e-12;
/// Adjacent slopes closer than this (relative to max(1,|s|)) are merged.
inline constexpr double kSlopeTol = 1e-12;

/// A continuous piecewise-linear function R -> R stored as sorted
/// breakpoints, one slope per piece, and the value at the first breakpoint
/// (or at t = 0 when there is no breakpoint). The representation is always
/// canonical: no two breakpoints closer than kBreakpointTol and no
/// removable breakpoint.
class ScalarCPWL {
 public:
  /// The identity t -> t.
  ScalarCPWL();
  /// Builds and canonicalizes. Throws std::invalid_argument if
  /// slopes.size() != breakpoints.size() + 1 or breakpoints decrease.
  ScalarCPWL(std::vector<double> breakpoints, std::vector<double> slopes,
             double anchor_value);

  static ScalarCPWL affine(double slope, double intercept);
  static ScalarCPWL relu();
  static ScalarCPWL leaky_relu(double negative_slope);
  static ScalarCPWL abs();

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& slopes() const { return slopes_; }
  double anchor_value() const { return anchor_; }

  std::size_t region_count() const { return slopes_.size(); }
  std::size_t knot_count() const { return breakpoints_.size(); }

  double operator()(double t) const;

  /// Piece containing t; at a breakpoint the piece on the side of
  /// `direction` is returned (right piece when direction == 0).
  std::size_t piece_at(double t, double direction = 0.0) const;
  double slope(std::size_t piece) const { return slopes_[piece]; }
  /// Intercept c of the piece: value = slope * t + c on that piece.
  double intercept(std::size_t piece) const;

  /// Re-canonicalized copy (idempotent).
  ScalarCPWL canonical() const;

  bool operator==(const ScalarCPWL& other) const;
  /// Same knot count, with breakpoints, slopes and anchor within `tol`
  /// relative to max(1, |value|).
  bool approx_equal(const ScalarCPWL& other, double tol = 1e-9) const;

 private:
  void canonicalize();

  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
  std::vector<double> knot_values_;
  double anchor_ = 0.0;
};

/// t -> outer(inner(t)).
ScalarCPWL compose_scalar(const ScalarCPWL& outer, const ScalarCPWL& inner);
/// t -> f(t) + g(t).
ScalarCPWL sum_scalar(const ScalarCPWL& f, const ScalarCPWL& g);
/// t -> a * f(t) + c.
ScalarCPWL scale_scalar(const ScalarCPWL& f, double a, double c = 0.0);

struct AffineMap {
  Matrix matrix;
  Vector offset;

  AffineMap() = default;
  AffineMap(Matrix m, Vector b);
  static AffineMap identity(std::size_t n);

  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(matrix.cols()); }
  Vector operator()(const Vector& x) const { return matrix * x + offset; }
  /// this ∘ inner
  AffineMap after(const AffineMap& inner) const;
};

struct AffineLayer {
  AffineMap map;
};

/// One scalar activation per coordinate (ReLU, leaky ReLU, abs and
/// learnable deep splines are all special cases).
struct PointwiseLayer {
  std::vector<ScalarCPWL> units;
};

/// Each unit is the max of `rank` affine functions of the layer input; the
/// unit's map has `rank` rows.
struct MaxoutLayer {
  std::size_t rank = 1;
  std::vector<AffineMap> units;
};

/// Sorts consecutive groups of `group_size` coordinates in ascending order.
struct GroupSortLayer {
  std::size_t group_size = 2;
};

/// 2D piecewise-linear units on a uniform grid_m x grid_m grid over
/// [-1,1]^2. values[k](i, j) is the control value of unit k at
/// (u_i, v_j) = (-1 + 2i/(M-1), -1 + 2j/(M-1)). Each grid cell is split by
/// its (+1,+1) diagonal. Outside [-1,1]^2 the input is clamped onto the
/// square. readin[k] maps the layer input to the unit's (u, v).
struct Pwlu2dLayer {
  std::size_t grid_m = 2;
  std::vector<Matrix> values;
  std::vector<AffineMap> readin;
};

using LayerSpec = std::variant<AffineLayer, PointwiseLayer, MaxoutLayer,
                               GroupSortLayer, Pwlu2dLayer>;

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<LayerSpec> layers;
  std::string metadata;

  /// widths()[0] = input_dim, widths()[i + 1] = output width of layer i.
  /// Throws SpecError on any inconsistency.
  std::vector<std::size_t> widths() const;
  std::size_t output_dim() const { return widths().back(); }
  void validate() const { (void)widths(); }
};

/// Output width of `layer` given its input width; throws SpecError naming
/// `index` when the layer cannot accept `in_dim` inputs.
std::size_t layer_output_dim(const LayerSpec& layer, std::size_t in_dim,
                             std::size_t index);

/// Exact forward evaluation.
Vector eval(const NetworkSpec& net, const Vector& x);
Vector eval_layer(const LayerSpec& layer, const Vector& x);

/// Local affine piece active at `x` on the side of direction `side`:
/// for small eps > 0, net(x + eps*u) = map(x + eps*u).
struct LocalAffine {
  Vector value;
  AffineMap map;
};
LocalAffine eval_jacobian(const NetworkSpec& net, const Vector& x,
                          const Vector& side);

/// Identifies one linear piece of a layer: one entry per unit for pointwise,
/// maxout and PWLU layers (the active piece / argmax / PWLU piece id), and
/// the full output-to-input permutation for group sort layers.
using PieceChoice = std::vector<int>;

/// Piece of `layer` active at layer input `x` on the side of `dx`.
PieceChoice select_piece(const LayerSpec& layer, const Vector& x,
                         const Vector& dx);

/// Affine map of `layer` restricted to the piece `choice`.
AffineMap local_affine(const LayerSpec& layer, const PieceChoice& choice,
                       std::size_t in_dim);

/// Layers of `first` followed by layers of `second`.
NetworkSpec concat(const NetworkSpec& first, const NetworkSpec& second);

/// A network consisting of one affine layer.
NetworkSpec affine_network(const AffineMap& map, std::string metadata = {});

/// Single pointwise activation applied to a scalar input.
NetworkSpec scalar_network(const ScalarCPWL& f, std::string metadata = {});

}  // namespace cpwl
