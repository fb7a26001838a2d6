// SPDX-License-Identifier: Apache-2.0
//
// Closed-form region-count bounds in exact big-integer arithmetic.

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cpwl/core.hpp"

namespace cpwl {

using BigInt = boost::multiprecision::cpp_int;

BigInt binomial(std::size_t n, std::size_t k);
BigInt factorial(std::size_t n);
BigInt ipow(const BigInt& base, std::size_t exp);

/// Maximal cell count of an arrangement of N convex partitions of R^d with
/// ns[k] regions each: 1 + sum over k-subsets (k <= min(d, N)) of the
/// products of (n - 1).
BigInt beta(std::size_t d, const std::vector<std::size_t>& ns);

/// The caps (n^N, (1 + N(n-1))^d) for N partitions of n regions each.
std::pair<BigInt, BigInt> beta_simplified(std::size_t d, std::size_t N, std::size_t n);

/// Number of convex regions needed for a function with rho projection
/// regions in R^d (via the arrangement of rho(rho-1)/2 hyperplanes).
BigInt projection_to_convex_cap(std::size_t rho, std::size_t d);

/// Depth, layer dimensions and activation complexities of a network.
/// Layer l maps R^{dims[l]} to R^{dims[l+1]}; kappas[l][k] is the region
/// count of its k-th output component. `partitions[l]`, when nonempty,
/// lists the convex partitions whose arrangement bounds layer l (used when
/// outputs are not independent, e.g. one partition per sorting group);
/// otherwise kappas[l] is used.
struct ArchitectureDescriptor {
  std::vector<std::size_t> dims;
  std::vector<std::vector<std::size_t>> kappas;
  std::vector<std::vector<std::size_t>> partitions;
  std::string family = "generic";

  /// Throws std::invalid_argument on inconsistent sizes or zero entries.
  void validate() const;
  std::size_t depth() const { return kappas.size(); }
  std::size_t width() const;
  std::size_t d_in() const { return dims.front(); }
  std::size_t d_out() const { return dims.back(); }
  /// min over all layer dimensions (the number of independent coordinate
  /// groups a construction can carry through every layer).
  std::size_t d_star() const;
  const std::vector<std::size_t>& layer_partitions(std::size_t l) const;

  /// Uniform kappa on every unit of every layer.
  static ArchitectureDescriptor uniform(std::vector<std::size_t> dims, std::size_t kappa,
                                        std::string family = "generic");
};

/// Descriptor read off a network: runs of affine layers are merged into the
/// next activation layer; a trailing affine layer counts as a layer with
/// kappa = 1. Pointwise units contribute their region counts, maxout units
/// their rank, group sort one partition of g! regions per group, PWLU units
/// their piece count.
ArchitectureDescriptor descriptor_from_network(const NetworkSpec& net);

struct UpperBound {
  BigInt value;
  std::vector<BigInt> factors;
};

/// prod_l beta^{min(d_1..d_l)}(partitions of layer l).
UpperBound compositional_upper(const ArchitectureDescriptor& arch);

struct TauResult {
  BigInt value;
  /// per layer: group index (0-based, < d*) of every unit
  std::vector<std::vector<std::size_t>> tau;
  std::vector<BigInt> factors;
  bool heuristic = false;
};

/// Maximum over tau of prod_r sum_{k in group r} kappa (printed form).
TauResult alpha_lower_paper(const ArchitectureDescriptor& arch);
/// Maximum over tau of prod_r (1 + sum_{k in group r} (kappa - 1)); the
/// value realized by sawtooth_network.
TauResult alpha_lower_constructive(const ArchitectureDescriptor& arch);

/// Units per layer up to which tau is optimized exhaustively.
inline constexpr std::size_t kExactTauUnits = 12;

struct Envelope {
  BigInt lower_paper;
  BigInt upper;
  std::vector<std::string> warnings;
};

/// (kappa floor(W/d*))^{L d*} and (kappa W)^{L d_in} with d* = min(d_in, d_out).
/// Throws std::invalid_argument when W < d_in.
Envelope corollary_envelope(std::size_t d_in, std::size_t W, std::size_t d_out,
                            std::size_t L, std::size_t kappa);

/// Descriptor of the uniform family (d_in, W x L, d_out): L activated layers
/// of width W and complexity kappa, then an affine readout.
ArchitectureDescriptor corollary_family(std::size_t d_in, std::size_t W, std::size_t d_out,
                                        std::size_t L, std::size_t kappa);

struct BoundReport {
  std::string family;
  std::string formula;
  std::map<std::string, std::string> params;
  BigInt value;
  /// optional envelope (lower, upper); zero when absent
  BigInt envelope_lower = 0;
  BigInt envelope_upper = 0;
  std::vector<BigInt> factors;
};

/// Worked formulas for common building blocks and architectures.
/// family: ridge {d, N}; maxpool {d, dprime, N}; ghh {d, N};
/// groupsort_activation {d, gs}; sort {d}; pwlu_unit {M};
/// pwlu_layer {d, N, M}; relu {dims}; deepspline {dims, kappa};
/// maxout {dims, kappa}; groupsort {dims, gs}.
/// Integer parameters go in `p`, dimension lists in `dims`.
BoundReport architecture_bound(const std::string& family,
                               const std::map<std::string, std::size_t>& p,
                               const std::vector<std::size_t>& dims = {});

std::string to_string(const BigInt& v);

}  // namespace cpwl
