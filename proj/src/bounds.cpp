// SPDX-License-Identifier: Apache-2.0

#include "cpwl/bounds.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cpwl/pieces.hpp"

namespace cpwl {

BigInt binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

BigInt factorial(std::size_t n) {
  BigInt r = 1;
  for (std::size_t i = 2; i <= n; ++i) r *= i;
  return r;
}

BigInt ipow(const BigInt& base, std::size_t exp) {
  BigInt r = 1, b = base;
  while (exp > 0) {
    if (exp & 1U) r *= b;
    exp >>= 1U;
    if (exp > 0) b *= b;
  }
  return r;
}

std::string to_string(const BigInt& v) { return v.str(); }

BigInt beta(std::size_t d, const std::vector<std::size_t>& ns) {
  const std::size_t kmax = std::min(d, ns.size());
  // e[k] = k-th elementary symmetric polynomial of (n - 1)
  std::vector<BigInt> e(kmax + 1, 0);
  e[0] = 1;
  for (std::size_t n : ns) {
    if (n < 1) throw std::invalid_argument("beta: partition sizes must be >= 1");
    const BigInt w = n - 1;
    for (std::size_t k = kmax; k >= 1; --k) e[k] += e[k - 1] * w;
  }
  BigInt total = 0;
  for (const auto& v : e) total += v;
  return total;
}

std::pair<BigInt, BigInt> beta_simplified(std::size_t d, std::size_t N, std::size_t n) {
  if (n < 1) throw std::invalid_argument("beta_simplified: n must be >= 1");
  return {ipow(BigInt(n), N), ipow(BigInt(1) + BigInt(N) * (n - 1), d)};
}

BigInt projection_to_convex_cap(std::size_t rho, std::size_t d) {
  if (rho < 1) throw std::invalid_argument("projection_to_convex_cap: rho must be >= 1");
  const std::size_t h = rho * (rho - 1) / 2;
  if (h <= d) return ipow(BigInt(2), h);
  BigInt s = 0;
  for (std::size_t k = 0; k <= d; ++k) s += binomial(h, k);
  return s;
}

// ------------------------------------------------------------- descriptors

void ArchitectureDescriptor::validate() const {
  if (dims.empty()) throw std::invalid_argument("descriptor: empty dims");
  if (dims.size() != kappas.size() + 1) {
    throw std::invalid_argument("descriptor: need one more dimension than layers");
  }
  for (std::size_t d : dims) {
    if (d < 1) throw std::invalid_argument("descriptor: dimensions must be >= 1");
  }
  for (std::size_t l = 0; l < kappas.size(); ++l) {
    if (kappas[l].size() != dims[l + 1]) {
      throw std::invalid_argument("descriptor: layer " + std::to_string(l) +
                                  " needs one kappa per output");
    }
    for (std::size_t k : kappas[l]) {
      if (k < 1) throw std::invalid_argument("descriptor: kappa must be >= 1");
    }
  }
  if (!partitions.empty()) {
    if (partitions.size() != kappas.size()) {
      throw std::invalid_argument("descriptor: partitions must be given per layer");
    }
    for (const auto& layer : partitions) {
      for (std::size_t k : layer) {
        if (k < 1) throw std::invalid_argument("descriptor: partition sizes must be >= 1");
      }
    }
  }
}

std::size_t ArchitectureDescriptor::width() const {
  if (dims.size() <= 2) return dims.size() == 2 ? dims[1] : dims[0];
  return *std::max_element(dims.begin() + 1, dims.end() - 1);
}

std::size_t ArchitectureDescriptor::d_star() const {
  return *std::min_element(dims.begin(), dims.end());
}

const std::vector<std::size_t>& ArchitectureDescriptor::layer_partitions(std::size_t l) const {
  if (!partitions.empty() && !partitions[l].empty()) return partitions[l];
  return kappas[l];
}

ArchitectureDescriptor ArchitectureDescriptor::uniform(std::vector<std::size_t> dims,
                                                       std::size_t kappa, std::string family) {
  ArchitectureDescriptor a;
  a.dims = std::move(dims);
  a.family = std::move(family);
  for (std::size_t l = 1; l < a.dims.size(); ++l) {
    a.kappas.emplace_back(a.dims[l], kappa);
  }
  a.validate();
  return a;
}

ArchitectureDescriptor descriptor_from_network(const NetworkSpec& net) {
  const auto widths = net.widths();
  ArchitectureDescriptor a;
  a.dims.push_back(net.input_dim);
  bool pending_affine = false;
  bool any_partitions = false;
  std::vector<std::vector<std::size_t>> parts;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const std::size_t out = widths[i + 1];
    if (std::holds_alternative<AffineLayer>(layer)) {
      pending_affine = true;
      continue;
    }
    pending_affine = false;
    std::vector<std::size_t> k;
    std::vector<std::size_t> p;
    if (const auto* pw = std::get_if<PointwiseLayer>(&layer)) {
      for (const auto& u : pw->units) k.push_back(u.region_count());
    } else if (const auto* mx = std::get_if<MaxoutLayer>(&layer)) {
      k.assign(out, mx->rank);
    } else if (const auto* gs = std::get_if<GroupSortLayer>(&layer)) {
      k.assign(out, gs->group_size);
      const auto f = factorial(gs->group_size).convert_to<std::size_t>();
      p.assign(out / gs->group_size, f);
      any_partitions = true;
    } else {
      const auto& pl = std::get<Pwlu2dLayer>(layer);
      k.assign(out, pwlu_piece_count(pl.grid_m));
    }
    a.dims.push_back(out);
    a.kappas.push_back(std::move(k));
    parts.push_back(std::move(p));
  }
  if (pending_affine) {
    a.dims.push_back(widths.back());
    a.kappas.emplace_back(widths.back(), 1);
    parts.emplace_back();
  }
  if (any_partitions) a.partitions = std::move(parts);
  a.validate();
  return a;
}

UpperBound compositional_upper(const ArchitectureDescriptor& arch) {
  arch.validate();
  UpperBound r{1, {}};
  std::size_t dmin = arch.dims[0];
  for (std::size_t l = 0; l < arch.depth(); ++l) {
    dmin = std::min(dmin, arch.dims[l]);
    BigInt f = beta(dmin, arch.layer_partitions(l));
    r.value *= f;
    r.factors.push_back(std::move(f));
  }
  return r;
}

// ---------------------------------------------------------- tau search

namespace {

enum class AlphaKind { paper, constructive };

BigInt group_value(AlphaKind kind, std::size_t sum_kappa, std::size_t count) {
  if (kind == AlphaKind::paper) return sum_kappa;
  return 1 + (sum_kappa - count);
}

BigInt groups_product(AlphaKind kind, const std::vector<std::size_t>& sums,
                      const std::vector<std::size_t>& counts) {
  BigInt p = 1;
  for (std::size_t r = 0; r < sums.size(); ++r) p *= group_value(kind, sums[r], counts[r]);
  return p;
}

struct LayerTau {
  BigInt value;
  std::vector<std::size_t> tau;
};

void tau_dfs(AlphaKind kind, const std::vector<std::size_t>& kap, std::size_t k,
             std::size_t used, std::vector<std::size_t>& assign, std::vector<std::size_t>& sums,
             std::vector<std::size_t>& counts, LayerTau& best) {
  if (k == kap.size()) {
    // every group must be fed so the construction keeps each channel alive
    if (used < std::min(sums.size(), kap.size())) return;
    BigInt v = groups_product(kind, sums, counts);
    if (v > best.value) {
      best.value = std::move(v);
      best.tau = assign;
    }
    return;
  }
  // groups are interchangeable: a unit may open at most the next unused one
  const std::size_t limit = std::min(used + 1, sums.size());
  for (std::size_t r = 0; r < limit; ++r) {
    assign[k] = r;
    sums[r] += kap[k];
    counts[r] += 1;
    tau_dfs(kind, kap, k + 1, std::max(used, r + 1), assign, sums, counts, best);
    sums[r] -= kap[k];
    counts[r] -= 1;
  }
}

LayerTau best_tau(AlphaKind kind, const std::vector<std::size_t>& kap, std::size_t groups,
                  bool& heuristic) {
  LayerTau best{-1, {}};
  std::vector<std::size_t> sums(groups, 0), counts(groups, 0);
  if (kap.size() <= kExactTauUnits) {
    std::vector<std::size_t> assign(kap.size(), 0);
    tau_dfs(kind, kap, 0, 0, assign, sums, counts, best);
    return best;
  }
  heuristic = true;
  std::vector<std::size_t> order(kap.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return kap[a] > kap[b]; });
  best.tau.assign(kap.size(), 0);
  for (std::size_t k : order) {
    std::size_t pick = 0;
    for (std::size_t r = 1; r < groups; ++r) {
      if (counts[pick] != 0 && counts[r] == 0) {
        pick = r;
        continue;
      }
      if (counts[pick] == 0) break;
      if (group_value(kind, sums[r], counts[r]) < group_value(kind, sums[pick], counts[pick])) {
        pick = r;
      }
    }
    best.tau[k] = pick;
    sums[pick] += kap[k];
    counts[pick] += 1;
  }
  best.value = groups_product(kind, sums, counts);
  return best;
}

TauResult alpha(const ArchitectureDescriptor& arch, AlphaKind kind) {
  arch.validate();
  TauResult r{1, {}, {}, false};
  const std::size_t groups = arch.d_star();
  for (std::size_t l = 0; l < arch.depth(); ++l) {
    LayerTau t = best_tau(kind, arch.kappas[l], groups, r.heuristic);
    r.value *= t.value;
    r.factors.push_back(t.value);
    r.tau.push_back(std::move(t.tau));
  }
  return r;
}

}  // namespace

TauResult alpha_lower_paper(const ArchitectureDescriptor& arch) {
  return alpha(arch, AlphaKind::paper);
}

TauResult alpha_lower_constructive(const ArchitectureDescriptor& arch) {
  return alpha(arch, AlphaKind::constructive);
}

Envelope corollary_envelope(std::size_t d_in, std::size_t W, std::size_t d_out, std::size_t L,
                            std::size_t kappa) {
  if (d_in < 1 || W < 1 || d_out < 1 || kappa < 1) {
    throw std::invalid_argument("corollary_envelope: dimensions and kappa must be >= 1");
  }
  if (W < d_in) throw std::invalid_argument("corollary_envelope: requires W >= d_in");
  Envelope e;
  const std::size_t ds = std::min(d_in, d_out);
  e.lower_paper = ipow(BigInt(kappa) * (W / ds), L * ds);
  e.upper = ipow(BigInt(kappa) * W, L * d_in);
  if (d_out > W) e.warnings.push_back("d_out > W: outside the stated setting (W >= d_in only)");
  return e;
}

ArchitectureDescriptor corollary_family(std::size_t d_in, std::size_t W, std::size_t d_out,
                                        std::size_t L, std::size_t kappa) {
  ArchitectureDescriptor a;
  a.dims.push_back(d_in);
  for (std::size_t l = 0; l < L; ++l) {
    a.dims.push_back(W);
    a.kappas.emplace_back(W, kappa);
  }
  a.dims.push_back(d_out);
  a.kappas.emplace_back(d_out, 1);
  a.family = "uniform";
  a.validate();
  return a;
}

// ------------------------------------------------------ worked formulas

namespace {

std::size_t need(const std::map<std::string, std::size_t>& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw std::invalid_argument("missing parameter '" + key + "'");
  return it->second;
}

// prod_l sum_{k <= min(d_1..d_l)} C(m_l, k) w_l^k, with m_l and w_l given
// per layer.
BoundReport deep_product(const std::vector<std::size_t>& dims,
                         const std::vector<std::size_t>& counts,
                         const std::vector<std::size_t>& weights) {
  BoundReport r;
  r.value = 1;
  std::size_t dmin = dims[0];
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    dmin = std::min(dmin, dims[l]);
    BigInt f = 0;
    for (std::size_t k = 0; k <= std::min(dmin, counts[l]); ++k) {
      f += binomial(counts[l], k) * ipow(BigInt(weights[l]), k);
    }
    r.value *= f;
    r.factors.push_back(f);
  }
  return r;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

BoundReport architecture_bound(const std::string& family,
                               const std::map<std::string, std::size_t>& p,
                               const std::vector<std::size_t>& dims) {
  BoundReport r;
  r.family = family;
  for (const auto& [k, v] : p) r.params[k] = std::to_string(v);
  if (!dims.empty()) r.params["dims"] = join(dims);

  auto check_dims = [&] {
    if (dims.size() < 2) throw std::invalid_argument(family + ": need at least two dims");
    for (std::size_t d : dims) {
      if (d < 1) throw std::invalid_argument(family + ": dims must be >= 1");
    }
  };

  if (family == "ridge") {
    const std::size_t d = need(p, "d"), n = need(p, "N");
    r.value = beta(d, std::vector<std::size_t>(n, 2));
    r.envelope_upper = std::min(ipow(BigInt(2), n), ipow(BigInt(n + 1), d));
    r.formula = "sum_{k<=min(d,N)} C(N,k)";
  } else if (family == "maxpool") {
    const std::size_t d = need(p, "d"), dp = need(p, "dprime"), n = need(p, "N");
    if (n < 1) throw std::invalid_argument("maxpool: N must be >= 1");
    r.value = beta(d, std::vector<std::size_t>(dp, n));
    r.formula = "sum_{k<=min(d,d')} C(d',k) (N-1)^k";
  } else if (family == "ghh") {
    const std::size_t d = need(p, "d"), n = need(p, "N");
    r.value = beta(d, std::vector<std::size_t>(n, d + 1));
    r.envelope_upper = std::min(ipow(BigInt(d + 1), n), ipow(BigInt(n * d + 1), d));
    r.formula = "sum_{k<=min(d,N)} C(N,k) d^k";
  } else if (family == "groupsort_activation") {
    const std::size_t d = need(p, "d"), gs = need(p, "gs");
    if (gs < 1 || d % gs != 0) throw std::invalid_argument("groupsort: d not divisible by gs");
    r.value = ipow(factorial(gs), d / gs);
    // floor((gs/2)^(d/2)) = isqrt(floor(gs^d / 2^d))
    r.envelope_lower = boost::multiprecision::sqrt(ipow(BigInt(gs), d) / ipow(BigInt(2), d));
    r.envelope_upper = ipow(BigInt(gs), d);
    r.formula = "(gs!)^(d/gs), envelope (gs/2)^(d/2) .. gs^d";
  } else if (family == "sort") {
    const std::size_t d = need(p, "d");
    r.value = factorial(d);
    r.formula = "d!";
  } else if (family == "pwlu_unit") {
    const std::size_t m = need(p, "M");
    if (m < 2) throw std::invalid_argument("pwlu: M must be >= 2");
    r.value = 2 * (m - 1) * (m - 1);
    r.formula = "2(M-1)^2 triangles on [-1,1]^2";
  } else if (family == "pwlu_layer") {
    const std::size_t d = need(p, "d"), n = need(p, "N"), m = need(p, "M");
    if (m < 2) throw std::invalid_argument("pwlu: M must be >= 2");
    r.value = beta(d, std::vector<std::size_t>(n, 2 * (m - 1) * (m - 1)));
    r.formula = "beta^d_N(2(M-1)^2)";
  } else if (family == "relu") {
    check_dims();
    std::vector<std::size_t> counts(dims.begin() + 1, dims.end());
    BoundReport b = deep_product(dims, counts, std::vector<std::size_t>(counts.size(), 1));
    r.value = b.value;
    r.factors = b.factors;
    r.formula = "prod_l sum_{k<=min(d_1..d_l)} C(d_{l+1},k)";
  } else if (family == "deepspline" || family == "maxout") {
    check_dims();
    const std::size_t kappa = need(p, "kappa");
    if (kappa < 1) throw std::invalid_argument(family + ": kappa must be >= 1");
    std::vector<std::size_t> counts(dims.begin() + 1, dims.end());
    BoundReport b = deep_product(dims, counts, std::vector<std::size_t>(counts.size(), kappa - 1));
    r.value = b.value;
    r.factors = b.factors;
    r.formula = "prod_l sum_{k<=min(d_1..d_l)} C(d_{l+1},k) (kappa-1)^k";
  } else if (family == "groupsort") {
    check_dims();
    const std::size_t gs = need(p, "gs");
    std::vector<std::size_t> counts;
    for (std::size_t l = 1; l < dims.size(); ++l) {
      if (gs < 1 || dims[l] % gs != 0) {
        throw std::invalid_argument("groupsort: layer width not divisible by gs");
      }
      counts.push_back(dims[l] / gs);
    }
    const auto w = (factorial(gs) - 1).convert_to<std::size_t>();
    BoundReport b = deep_product(dims, counts, std::vector<std::size_t>(counts.size(), w));
    r.value = b.value;
    r.factors = b.factors;
    r.formula = "prod_l sum_{k<=min(d_1..d_l)} C(d_{l+1}/gs,k) (gs!-1)^k";
  } else {
    throw std::invalid_argument("unknown bound family '" + family + "'");
  }
  return r;
}

}  // namespace cpwl
