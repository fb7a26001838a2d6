// SPDX-License-Identifier: Apache-2.0

#include "cpwl/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cpwl/parallel.hpp"
#include "cpwl/random.hpp"

namespace cpwl {

Distribution parse_distribution(const std::string& name) {
  if (name == "normal") return Distribution::normal;
  if (name == "uniform") return Distribution::uniform;
  throw std::invalid_argument("unknown distribution '" + name + "'");
}

std::string to_string(Distribution d) { return d == Distribution::normal ? "normal" : "uniform"; }

void InitSpec::validate() const {
  if (!(sigma_w > 0.0) || !(sigma_b > 0.0)) {
    throw std::invalid_argument("sigma_w and sigma_b must be positive");
  }
}

double InitSpec::weight_sigma(std::size_t fan_in) const {
  if (!fan_in_scaling) return sigma_w;
  return std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
}

double InitSpec::sup_bias_density() const {
  if (bias_dist == Distribution::normal) return 1.0 / (sigma_b * std::sqrt(2.0 * std::numbers::pi));
  return 1.0 / (2.0 * std::sqrt(3.0) * sigma_b);
}

double draw(Distribution dist, double sigma, std::mt19937_64& rng) {
  if (dist == Distribution::normal) return std::normal_distribution<double>(0.0, sigma)(rng);
  const double a = std::sqrt(3.0) * sigma;
  return std::uniform_real_distribution<double>(-a, a)(rng);
}

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Distribution dist, double sigma,
                     Rng& rng) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = draw(dist, sigma, rng);
  }
  return m;
}

Vector random_vector(std::size_t n, Distribution dist, double sigma, Rng& rng) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = draw(dist, sigma, rng);
  return v;
}

ScalarCPWL random_unit(const std::string& family, std::size_t kappa, const InitSpec& init,
                       Rng& rng) {
  if (kappa == 1) return ScalarCPWL();
  if (family == "relu" || family == "leaky" || family == "abs") {
    if (kappa != 2) throw std::invalid_argument(family + " units have kappa 1 or 2");
    if (family == "relu") return ScalarCPWL::relu();
    if (family == "leaky") return ScalarCPWL::leaky_relu(0.01);
    return ScalarCPWL::abs();
  }
  // deepspline
  std::vector<double> knots, slopes;
  for (std::size_t i = 0; i + 1 < kappa; ++i) knots.push_back(draw(init.bias_dist, init.sigma_b, rng));
  std::sort(knots.begin(), knots.end());
  for (std::size_t i = 0; i < kappa; ++i) slopes.push_back(draw(Distribution::normal, 1.0, rng));
  const ScalarCPWL f(knots, slopes, 0.0);
  if (f.region_count() != kappa) throw std::runtime_error("deepspline sample lost a knot");
  return f;
}

std::size_t uniform_kappa(const std::vector<std::size_t>& kap, const std::string& what) {
  for (std::size_t k : kap) {
    if (k != kap.front()) throw std::invalid_argument(what + " needs one kappa per layer");
  }
  return kap.front();
}

}  // namespace

NetworkSpec sample_network(const ArchitectureDescriptor& arch, const InitSpec& init,
                           std::uint64_t seed) {
  arch.validate();
  init.validate();
  const std::string& fam = arch.family;
  const bool pointwise = fam == "relu" || fam == "leaky" || fam == "abs" || fam == "deepspline";
  if (!pointwise && fam != "maxout" && fam != "groupsort") {
    throw std::invalid_argument("sample_network: unsupported family '" + fam + "'");
  }
  NetworkSpec net;
  net.input_dim = arch.d_in();
  net.metadata = "sample_network " + fam;
  for (std::size_t l = 0; l < arch.depth(); ++l) {
    const std::size_t in = arch.dims[l], out = arch.dims[l + 1];
    const double sw = init.weight_sigma(in);
    Rng rng = make_rng(seed, 0x5A4D, l);
    if (fam == "maxout") {
      MaxoutLayer m;
      m.rank = uniform_kappa(arch.kappas[l], "maxout");
      for (std::size_t k = 0; k < out; ++k) {
        Matrix w = random_matrix(m.rank, in, init.weight_dist, sw, rng);
        Vector b = random_vector(m.rank, init.bias_dist, init.sigma_b, rng);
        m.units.emplace_back(std::move(w), std::move(b));
      }
      net.layers.emplace_back(std::move(m));
      continue;
    }
    Matrix w = random_matrix(out, in, init.weight_dist, sw, rng);
    Vector b = random_vector(out, init.bias_dist, init.sigma_b, rng);
    net.layers.emplace_back(AffineLayer{AffineMap(std::move(w), std::move(b))});
    if (fam == "groupsort") {
      const std::size_t g = uniform_kappa(arch.kappas[l], "groupsort");
      if (g > 1) net.layers.emplace_back(GroupSortLayer{g});
      continue;
    }
    std::vector<ScalarCPWL> units;
    for (std::size_t k = 0; k < out; ++k) units.push_back(random_unit(fam, arch.kappas[l][k], init, rng));
    net.layers.emplace_back(PointwiseLayer{std::move(units)});
  }
  net.validate();
  return net;
}

namespace {

double pairwise_sum(const double* p, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(p, h) + pairwise_sum(p + h, n - h);
}

}  // namespace

McEstimate summarize(std::vector<double> values) {
  if (values.size() < 2) throw std::invalid_argument("summarize: need at least 2 trials");
  McEstimate e;
  e.trials = values.size();
  const double n = static_cast<double>(values.size());
  e.mean = pairwise_sum(values.data(), values.size()) / n;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
  const double var = pairwise_sum(sq.data(), sq.size()) / (n - 1.0);
  e.se = std::sqrt(var / n);
  e.values = std::move(values);
  return e;
}

PolygonalPath probe_segment(std::size_t dim, double length, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x9A7);
  Vector u(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = std::normal_distribution<double>()(rng);
  } while (u.norm() < 1e-12);
  u.normalize();
  return PolygonalPath::segment(-0.5 * length * u, 0.5 * length * u);
}

double default_probe_length(const InitSpec& init, std::size_t fan_in) {
  return 10.0 * init.sigma_b / init.weight_sigma(fan_in);
}

McEstimate mc_knot_density(const NetworkSampler& nets, const PathSampler& paths,
                           std::size_t trials, std::uint64_t seed, std::size_t threads) {
  std::vector<double> v(trials);
  parallel_for(
      trials,
      [&](std::size_t i) {
        const NetworkSpec net = nets(derive_seed(seed, 1, i));
        const PolygonalPath path = paths(derive_seed(seed, 2, i));
        v[i] = count_knots(net, path, 1).density;
      },
      threads);
  return summarize(std::move(v));
}

double unit_density_bound(const std::string& family, const std::map<std::string, std::size_t>& p,
                          const InitSpec& init, std::size_t fan_in) {
  init.validate();
  const double sw = init.weight_sigma(fan_in);
  // E|w . u| for normal weights, its upper bound sqrt(E (w . u)^2) otherwise
  const double wf = init.weight_dist == Distribution::normal ? sw * std::sqrt(2.0 / std::numbers::pi) : sw;
  const double base = wf * init.sup_bias_density();
  auto get = [&](const char* key) {
    const auto it = p.find(key);
    if (it == p.end()) throw std::invalid_argument(std::string("missing parameter ") + key);
    return static_cast<double>(it->second);
  };
  if (family == "relu") return base;
  if (family == "maxout") {
    const double K = get("K");
    return std::sqrt(2.0) * (K * (K - 1.0) / 2.0) * base;
  }
  if (family == "groupsort") return std::sqrt(2.0) / 2.0 * get("d") * (get("gs") - 1.0) * base;
  throw std::invalid_argument("unit_density_bound: unsupported family '" + family + "'");
}

McEstimate mc_knot_density(const ArchitectureDescriptor& arch, const InitSpec& init,
                           std::size_t trials, std::uint64_t seed, double probe_length,
                           std::size_t threads) {
  const double len = probe_length > 0.0 ? probe_length : default_probe_length(init, arch.d_in());
  const std::size_t d = arch.d_in();
  McEstimate e = mc_knot_density([&](std::uint64_t s) { return sample_network(arch, init, s); },
                                 [&](std::uint64_t s) { return probe_segment(d, len, s); }, trials,
                                 seed, threads);
  if (arch.depth() == 1) {
    const std::size_t out = arch.d_out();
    const std::size_t k = arch.kappas[0][0];
    if (arch.family == "relu" || arch.family == "abs" || arch.family == "leaky") {
      e.bound = static_cast<double>(out) * unit_density_bound("relu", {}, init, d);
    } else if (arch.family == "maxout") {
      e.bound = static_cast<double>(out) * unit_density_bound("maxout", {{"K", k}}, init, d);
    } else if (arch.family == "groupsort") {
      e.bound = unit_density_bound("groupsort", {{"d", out}, {"gs", k}}, init, d);
    }
  }
  return e;
}

namespace {

// A network split into blocks: an affine map (identity when absent)
// followed by at most one activation layer.
struct Block {
  AffineMap affine;
  const LayerSpec* activation = nullptr;
};

std::vector<Block> blocks(const NetworkSpec& net) {
  std::vector<Block> out;
  const auto widths = net.widths();
  AffineMap acc = AffineMap::identity(net.input_dim);
  bool pending = false;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* a = std::get_if<AffineLayer>(&net.layers[i])) {
      acc = a->map.after(acc);
      pending = true;
      continue;
    }
    out.push_back({acc, &net.layers[i]});
    acc = AffineMap::identity(widths[i + 1]);
    pending = false;
  }
  if (pending) out.push_back({acc, nullptr});
  return out;
}

// Directional derivative norms at the end of every block.
std::vector<double> prefix_expansion(const NetworkSpec& net, const Vector& x, const Vector& u) {
  std::vector<double> out;
  const auto widths = net.widths();
  Vector z = x, dz = u;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    const PieceChoice c = select_piece(layer, z, dz);
    const AffineMap a = local_affine(layer, c, widths[i]);
    z = a(z);
    dz = a.matrix * dz;
    const bool last = i + 1 == net.layers.size();
    if (!std::holds_alternative<AffineLayer>(layer) || last) out.push_back(dz.norm());
  }
  if (net.layers.empty()) out.push_back(u.norm());
  return out;
}

// Largest of the per-group means, keeping all group means.
McEstimate max_over_groups(std::vector<std::vector<double>> groups) {
  McEstimate best;
  std::vector<double> means, ses;
  bool first = true;
  for (auto& g : groups) {
    McEstimate e = summarize(std::move(g));
    means.push_back(e.mean);
    ses.push_back(e.se);
    if (first || e.mean > best.mean) best = std::move(e);
    first = false;
  }
  best.by_depth = std::move(means);
  best.se_by_depth = std::move(ses);
  return best;
}

// One block as a stand-alone network.
NetworkSpec block_network(const Block& b) {
  NetworkSpec net;
  net.input_dim = b.affine.cols();
  net.layers.emplace_back(AffineLayer{b.affine});
  if (b.activation) net.layers.push_back(*b.activation);
  return net;
}

// Component `k` of a block: one output unit, or the sorting group holding it.
NetworkSpec component_network(const Block& b, std::size_t k) {
  NetworkSpec net;
  net.input_dim = b.affine.cols();
  auto rows = [&](std::size_t from, std::size_t count) {
    const auto r = static_cast<Eigen::Index>(from), c = static_cast<Eigen::Index>(count);
    return AffineMap(b.affine.matrix.middleRows(r, c), b.affine.offset.segment(r, c));
  };
  if (!b.activation) {
    net.layers.emplace_back(AffineLayer{rows(k, 1)});
  } else if (const auto* p = std::get_if<PointwiseLayer>(b.activation)) {
    net.layers.emplace_back(AffineLayer{rows(k, 1)});
    net.layers.emplace_back(PointwiseLayer{{p->units[k]}});
  } else if (const auto* m = std::get_if<MaxoutLayer>(b.activation)) {
    net.layers.emplace_back(AffineLayer{b.affine});
    net.layers.emplace_back(MaxoutLayer{m->rank, {m->units[k]}});
  } else if (const auto* g = std::get_if<GroupSortLayer>(b.activation)) {
    const std::size_t start = k - k % g->group_size;
    net.layers.emplace_back(AffineLayer{rows(start, g->group_size)});
    net.layers.emplace_back(*g);
  } else if (const auto* w = std::get_if<Pwlu2dLayer>(b.activation)) {
    net.layers.emplace_back(AffineLayer{b.affine});
    net.layers.emplace_back(Pwlu2dLayer{w->grid_m, {w->values[k]}, {w->readin[k]}});
  }
  net.validate();
  return net;
}

std::size_t block_units(const Block& b) {
  if (!b.activation) return b.affine.rows();
  if (const auto* m = std::get_if<MaxoutLayer>(b.activation)) return m->units.size();
  if (const auto* w = std::get_if<Pwlu2dLayer>(b.activation)) return w->readin.size();
  return b.affine.rows();
}

}  // namespace

McEstimate estimate_directional_expansion(const NetworkSampler& nets, std::size_t input_dim,
                                          double probe_length, std::size_t trials,
                                          std::uint64_t seed, std::size_t threads) {
  std::vector<std::vector<double>> per_trial(trials);
  parallel_for(
      trials,
      [&](std::size_t i) {
        const NetworkSpec net = nets(derive_seed(seed, 1, i));
        const PolygonalPath path = probe_segment(input_dim, probe_length, derive_seed(seed, 2, i));
        Rng rng = make_rng(seed, 3, i);
        const double t = std::uniform_real_distribution<double>(0.0, path.length())(rng);
        const Vector u = (path.vertices[1] - path.vertices[0]).normalized();
        per_trial[i] = prefix_expansion(net, path.point_at(t), u);
      },
      threads);
  const std::size_t depth = trials ? per_trial[0].size() : 0;
  std::vector<std::vector<double>> groups(depth, std::vector<double>(trials));
  for (std::size_t i = 0; i < trials; ++i) {
    if (per_trial[i].size() != depth) throw std::invalid_argument("sampled networks differ in depth");
    for (std::size_t l = 0; l < depth; ++l) groups[l][i] = per_trial[i][l];
  }
  return max_over_groups(std::move(groups));
}

McEstimate estimate_directional_expansion(const ArchitectureDescriptor& arch,
                                          const InitSpec& init, std::size_t trials,
                                          std::uint64_t seed, std::size_t threads) {
  return estimate_directional_expansion(
      [&](std::uint64_t s) { return sample_network(arch, init, s); }, arch.d_in(),
      default_probe_length(init, arch.d_in()), trials, seed, threads);
}

namespace {

// Trials cycle through the layers of sampled networks; `measure` maps
// (layer block, layer input dim, trial rng) to one value.
template <class Measure>
McEstimate per_layer_estimate(const ArchitectureDescriptor& arch, const InitSpec& init,
                              std::size_t trials, std::uint64_t seed, std::size_t threads,
                              Measure measure) {
  const std::size_t depth = arch.depth();
  std::vector<double> v(trials);
  parallel_for(
      trials,
      [&](std::size_t i) {
        const NetworkSpec net = sample_network(arch, init, derive_seed(seed, 1, i));
        const auto bl = blocks(net);
        const std::size_t l = i % depth;
        Rng rng = make_rng(seed, 3, i);
        v[i] = measure(bl[l], arch.dims[l], derive_seed(seed, 2, i), rng);
      },
      threads);
  std::vector<std::vector<double>> groups(depth);
  for (std::size_t i = 0; i < trials; ++i) groups[i % depth].push_back(v[i]);
  return max_over_groups(std::move(groups));
}

}  // namespace

McEstimate estimate_layer_expansion(const ArchitectureDescriptor& arch, const InitSpec& init,
                                    std::size_t trials, std::uint64_t seed, std::size_t threads) {
  return per_layer_estimate(
      arch, init, trials, seed, threads,
      [&](const Block& b, std::size_t dim, std::uint64_t path_seed, Rng& rng) {
        const PolygonalPath path = probe_segment(dim, default_probe_length(init, dim), path_seed);
        const double t = std::uniform_real_distribution<double>(0.0, path.length())(rng);
        const Vector u = (path.vertices[1] - path.vertices[0]).normalized();
        return prefix_expansion(block_network(b), path.point_at(t), u).back();
      });
}

McEstimate estimate_unit_density(const ArchitectureDescriptor& arch, const InitSpec& init,
                                 std::size_t trials, std::uint64_t seed, double probe_length,
                                 std::size_t threads) {
  return per_layer_estimate(
      arch, init, trials, seed, threads,
      [&](const Block& b, std::size_t dim, std::uint64_t path_seed, Rng& rng) {
        const std::size_t units = block_units(b);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, units - 1)(rng);
        const double len = probe_length > 0.0 ? probe_length : default_probe_length(init, dim);
        const PolygonalPath path = probe_segment(dim, len, path_seed);
        return count_knots(component_network(b, k), path, 1).density;
      });
}

DensityBound compositional_density_bound(double lambda0, double D0, std::size_t W, std::size_t L) {
  if (lambda0 < 0.0 || D0 < 0.0) throw std::invalid_argument("lambda0 and D0 must be >= 0");
  const double w = static_cast<double>(W), l = static_cast<double>(L);
  DensityBound b;
  if (std::abs(D0 - 1.0) < 1e-15) {
    b.geometric = lambda0 * w * l;
  } else {
    b.geometric = lambda0 * w * (1.0 - std::pow(D0, l)) / (1.0 - D0);
  }
  b.corollary = std::max(D0, 1.0) * lambda0 * w * l;
  return b;
}

McEstimate mc_image_length(const NetworkSampler& nets, const PolygonalPath& path,
                           std::size_t trials, std::uint64_t seed, std::size_t threads) {
  std::vector<double> v(trials);
  parallel_for(
      trials, [&](std::size_t i) { v[i] = image_length(nets(derive_seed(seed, 1, i)), path); },
      threads);
  return summarize(std::move(v));
}

}  // namespace cpwl
