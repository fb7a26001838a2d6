// SPDX-License-Identifier: Apache-2.0
//
// Random networks at initialization, Monte Carlo estimates of knot density,
// directional expansion and image length, and the matching closed-form
// density bounds.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cpwl/bounds.hpp"
#include "cpwl/core.hpp"
#include "cpwl/paths.hpp"

namespace cpwl {

enum class Distribution { normal, uniform };

Distribution parse_distribution(const std::string& name);
std::string to_string(Distribution d);

/// Zero-mean i.i.d. initialization. With `fan_in_scaling` the weight
/// variance is 2 / fan_in and sigma_w is ignored.
struct InitSpec {
  Distribution weight_dist = Distribution::normal;
  Distribution bias_dist = Distribution::normal;
  double sigma_w = 1.0;
  double sigma_b = 1.0;
  bool fan_in_scaling = false;

  /// Throws std::invalid_argument unless sigma_w, sigma_b > 0.
  void validate() const;
  /// Weight standard deviation for a layer with `fan_in` inputs.
  double weight_sigma(std::size_t fan_in) const;
  /// sup_t of the bias density.
  double sup_bias_density() const;
};

/// One draw from `dist` with standard deviation `sigma`.
double draw(Distribution dist, double sigma, std::mt19937_64& rng);

/// Families: relu, leaky (negative slope 0.01), abs, deepspline (kappa - 1
/// knots drawn from the bias distribution, slopes standard normal), maxout
/// (rank = kappa), groupsort (group size = kappa). Pointwise and group sort
/// layers are an affine map followed by the activation; maxout layers hold
/// their own affine functions. Units with kappa = 1 are the identity.
/// Layer l draws from its own sub-seed, so layers are independent.
NetworkSpec sample_network(const ArchitectureDescriptor& arch, const InitSpec& init,
                           std::uint64_t seed);

/// Mean with standard error over independent trials.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t trials = 0;
  std::vector<double> values;
  /// theoretical value compared against (NaN when none)
  double bound = std::numeric_limits<double>::quiet_NaN();
  /// per-layer or per-prefix means when the estimate is a maximum over them
  std::vector<double> by_depth;
  std::vector<double> se_by_depth;
};

/// Mean and standard error with pairwise summation (order-independent up to
/// rounding, reproducible for a fixed value order). Needs >= 2 values.
McEstimate summarize(std::vector<double> values);

/// Probe segment of the given length (0 = 10 sigma_b / sigma_w at the input
/// layer) centered at the origin with a uniformly random direction.
PolygonalPath probe_segment(std::size_t dim, double length, std::uint64_t seed);
double default_probe_length(const InitSpec& init, std::size_t fan_in);

using NetworkSampler = std::function<NetworkSpec(std::uint64_t seed)>;
using PathSampler = std::function<PolygonalPath(std::uint64_t seed)>;

/// Expected knot density of sampled networks along sampled paths. Trial i
/// uses sub-seeds derived from (seed, i), so results do not depend on the
/// thread count.
McEstimate mc_knot_density(const NetworkSampler& nets, const PathSampler& paths,
                           std::size_t trials, std::uint64_t seed, std::size_t threads = 0);
McEstimate mc_knot_density(const ArchitectureDescriptor& arch, const InitSpec& init,
                           std::size_t trials, std::uint64_t seed, double probe_length = 0.0,
                           std::size_t threads = 0);

/// Closed-form density bound of one component.
/// relu: sqrt(E w^2) sup rho_b, or sigma_w / (pi sigma_b) for normal init;
/// maxout {K}: sqrt(2) C(K, 2) times the relu form;
/// groupsort {d, gs}: (sqrt(2) / 2) d (gs - 1) times the relu form.
/// `fan_in` resolves sigma_w under fan-in scaling.
double unit_density_bound(const std::string& family, const std::map<std::string, std::size_t>& params,
                          const InitSpec& init, std::size_t fan_in = 1);

/// Directional expansion: for random x on a probe segment and its direction
/// u, the norm of the directional derivative of every depth prefix. The
/// estimate is the prefix with the largest mean; by_depth holds all prefix
/// means. A prefix ends after each activation layer and at the output.
McEstimate estimate_directional_expansion(const NetworkSampler& nets, std::size_t input_dim,
                                          double probe_length, std::size_t trials,
                                          std::uint64_t seed, std::size_t threads = 0);
McEstimate estimate_directional_expansion(const ArchitectureDescriptor& arch,
                                          const InitSpec& init, std::size_t trials,
                                          std::uint64_t seed, std::size_t threads = 0);
/// Per-layer directional expansion E||D_u f_l(x)|| at the layer input
/// scale; the estimate is the largest layer mean.
McEstimate estimate_layer_expansion(const ArchitectureDescriptor& arch, const InitSpec& init,
                                    std::size_t trials, std::uint64_t seed,
                                    std::size_t threads = 0);

/// Knot density of single components (one output unit of one layer, or one
/// sorting group) along probe segments in that layer's input space. Trials
/// cycle through the layers; the estimate is the largest layer mean.
McEstimate estimate_unit_density(const ArchitectureDescriptor& arch, const InitSpec& init,
                                 std::size_t trials, std::uint64_t seed,
                                 double probe_length = 0.0, std::size_t threads = 0);

struct DensityBound {
  double geometric = 0.0;  // lambda0 W (1 - D0^L) / (1 - D0), lambda0 W L at D0 = 1
  double corollary = 0.0;  // max(D0, 1) lambda0 W L
};
DensityBound compositional_density_bound(double lambda0, double D0, std::size_t W, std::size_t L);

/// Expected length of net o path over sampled networks.
McEstimate mc_image_length(const NetworkSampler& nets, const PolygonalPath& path,
                           std::size_t trials, std::uint64_t seed, std::size_t threads = 0);

}  // namespace cpwl
