// SPDX-License-Identifier: Apache-2.0

#include "cpwl/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cpwl/random.hpp"

namespace cpwl {

ScalarCPWL sawtooth(std::size_t p) {
  if (p < 1) throw std::invalid_argument("sawtooth: order must be >= 1");
  if (p == 1) return ScalarCPWL();
  const double pd = static_cast<double>(p);
  std::vector<double> knots, slopes;
  for (std::size_t k = 1; k < p; ++k) knots.push_back(static_cast<double>(k) / pd);
  for (std::size_t k = 0; k < p; ++k) slopes.push_back(k % 2 == 0 ? pd : -pd);
  // value at the first knot 1/p is 1
  return ScalarCPWL(std::move(knots), std::move(slopes), 1.0);
}

ScalarCPWL SawtoothDecomposition::term(std::size_t j) const {
  const double c = coefficients[j];
  return ScalarCPWL({knots[j]}, {-c, c}, 0.0);
}

ScalarCPWL SawtoothDecomposition::resum() const {
  ScalarCPWL s = remainder();
  for (std::size_t j = 0; j < knots.size(); ++j) s = sum_scalar(s, term(j));
  return s;
}

SawtoothDecomposition sawtooth_decompose(std::size_t p) {
  if (p < 1) throw std::invalid_argument("sawtooth_decompose: order must be >= 1");
  SawtoothDecomposition d;
  const double pd = static_cast<double>(p);
  double sum_c = 0.0, sum_ck = 0.0;
  for (std::size_t j = 1; j < p; ++j) {
    // the slope jumps by 2p(-1)^j at j/p and |t - k| jumps by 2
    const double c = (j % 2 == 0) ? pd : -pd;
    const double k = static_cast<double>(j) / pd;
    d.knots.push_back(k);
    d.coefficients.push_back(c);
    sum_c += c;
    sum_ck += c * k;
  }
  // leftmost slope is p; value at 0 is 0
  d.slope = pd + sum_c;
  d.intercept = -sum_ck;
  return d;
}

namespace {

// sum_{j in [from, to)} c_j |t - k_j| (+ remainder when `with_remainder`).
ScalarCPWL partial_sawtooth(const SawtoothDecomposition& dec, std::size_t from, std::size_t to,
                            bool with_remainder) {
  const double a = with_remainder ? dec.slope : 0.0;
  const double b = with_remainder ? dec.intercept : 0.0;
  if (from == to) return ScalarCPWL::affine(a, b);
  std::vector<double> knots, slopes;
  double left = a;
  for (std::size_t j = from; j < to; ++j) left -= dec.coefficients[j];
  slopes.push_back(left);
  for (std::size_t j = from; j < to; ++j) {
    knots.push_back(dec.knots[j]);
    slopes.push_back(slopes.back() + 2.0 * dec.coefficients[j]);
  }
  const double t0 = knots.front();
  double v = a * t0 + b;
  for (std::size_t j = from; j < to; ++j) v += dec.coefficients[j] * std::abs(t0 - dec.knots[j]);
  return ScalarCPWL(std::move(knots), std::move(slopes), v);
}

bool pointwise_family(const std::string& f) {
  return f != "maxout" && f != "groupsort" && f != "pwlu";
}

}  // namespace

NetworkSpec sawtooth_network(const ArchitectureDescriptor& arch,
                             const std::optional<TauAssignment>& tau_in) {
  arch.validate();
  if (!pointwise_family(arch.family) || !arch.partitions.empty()) {
    throw std::invalid_argument("sawtooth_network: only pointwise families are supported");
  }
  const std::size_t groups = arch.d_star();
  const TauAssignment tau = tau_in ? *tau_in : alpha_lower_constructive(arch).tau;
  if (tau.size() != arch.depth()) throw std::invalid_argument("sawtooth_network: tau depth");

  NetworkSpec net;
  net.input_dim = arch.d_in();
  net.metadata = "sawtooth_network";
  for (std::size_t l = 0; l < arch.depth(); ++l) {
    const std::size_t in = arch.dims[l], out = arch.dims[l + 1];
    if (tau[l].size() != out) throw std::invalid_argument("sawtooth_network: tau width");
    Matrix W = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (std::size_t k = 0; k < out; ++k) {
      const std::size_t r = tau[l][k];
      if (r >= groups) throw std::invalid_argument("sawtooth_network: tau group out of range");
      const auto row = static_cast<Eigen::Index>(k);
      if (l == 0) {
        W(row, static_cast<Eigen::Index>(r)) = 1.0;
      } else {
        for (std::size_t kp = 0; kp < in; ++kp) {
          if (tau[l - 1][kp] == r) W(row, static_cast<Eigen::Index>(kp)) = 1.0;
        }
      }
    }
    net.layers.emplace_back(
        AffineLayer{AffineMap(std::move(W), Vector::Zero(static_cast<Eigen::Index>(out)))});

    std::vector<ScalarCPWL> units(out);
    for (std::size_t r = 0; r < groups; ++r) {
      std::size_t order = 1;
      for (std::size_t k = 0; k < out; ++k) {
        if (tau[l][k] == r) order += arch.kappas[l][k] - 1;
      }
      const auto dec = sawtooth_decompose(order);
      std::size_t next = 0;
      bool first = true;
      for (std::size_t k = 0; k < out; ++k) {
        if (tau[l][k] != r) continue;
        const std::size_t take = arch.kappas[l][k] - 1;
        units[k] = partial_sawtooth(dec, next, next + take, first);
        next += take;
        first = false;
      }
    }
    net.layers.emplace_back(PointwiseLayer{std::move(units)});
  }
  net.validate();
  return net;
}

NetworkSpec sawtooth_composition(std::size_t p, std::size_t q) {
  ArchitectureDescriptor a;
  a.dims = {1, 1, 1};
  a.kappas = {{p}, {q}};
  a.family = "deepspline";
  NetworkSpec n = sawtooth_network(a);
  n.metadata = "sw_" + std::to_string(q) + " o sw_" + std::to_string(p);
  return n;
}

namespace {

// Determinant threshold for accepting random directions; tighter than
// needed for general position so every arrangement vertex stays well inside
// the LP box.
constexpr double kMinDirectionDet = 0.05;
constexpr int kMaxRedraws = 2000;

bool directions_generic(const Matrix& dirs, std::size_t d) {
  const auto n = static_cast<std::size_t>(dirs.rows());
  if (d == 1) return true;
  if (n < d) {
    const Matrix g = dirs * dirs.transpose();
    return std::abs(g.determinant()) > kMinDirectionDet;
  }
  // every d-subset must be well conditioned
  std::vector<std::size_t> idx(d);
  for (std::size_t i = 0; i < d; ++i) idx[i] = i;
  for (;;) {
    Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) m.row(static_cast<Eigen::Index>(i)) = dirs.row(static_cast<Eigen::Index>(idx[i]));
    if (std::abs(m.determinant()) <= kMinDirectionDet) return false;
    std::size_t i = d;
    while (i > 0 && idx[i - 1] == n - d + i - 1) --i;
    if (i == 0) return true;
    ++idx[i - 1];
    for (std::size_t j = i; j < d; ++j) idx[j] = idx[j - 1] + 1;
  }
}

struct Arrangement {
  Matrix dirs;
  std::vector<std::vector<double>> knots;
};

Arrangement random_arrangement(std::size_t d, const std::vector<std::size_t>& ns,
                               std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("arrangement: d must be >= 1");
  for (std::size_t n : ns) {
    if (n < 1) throw std::invalid_argument("arrangement: partition sizes must be >= 1");
  }
  const auto N = static_cast<Eigen::Index>(ns.size());
  const auto D = static_cast<Eigen::Index>(d);
  Rng rng = make_rng(seed, 0x6770);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Arrangement a;
  a.dirs = Matrix::Ones(N, D);
  if (d > 1) {
    int tries = 0;
    do {
      if (++tries > kMaxRedraws) {
        throw std::runtime_error("arrangement: could not draw directions in general position");
      }
      for (Eigen::Index k = 0; k < N; ++k) {
        for (Eigen::Index j = 0; j < D; ++j) a.dirs(k, j) = normal(rng);
        a.dirs.row(k).normalize();
      }
    } while (!directions_generic(a.dirs, d));
  }
  // knots: distinct within [-1, 1] with a minimum gap
  std::vector<double> all;
  for (std::size_t n : ns) {
    std::vector<double> k;
    int tries = 0;
    for (;;) {
      if (++tries > kMaxRedraws) throw std::runtime_error("arrangement: knot sampling failed");
      k.clear();
      for (std::size_t i = 0; i + 1 < n; ++i) k.push_back(uni(rng));
      std::sort(k.begin(), k.end());
      bool ok = true;
      for (std::size_t i = 1; i < k.size(); ++i) ok = ok && (k[i] - k[i - 1] > 1e-3);
      // in 1D all knots share the line, keep them apart across units too
      if (d == 1) {
        for (double t : k) {
          for (double s : all) ok = ok && std::abs(t - s) > 1e-3;
        }
      }
      if (ok) break;
    }
    all.insert(all.end(), k.begin(), k.end());
    a.knots.push_back(std::move(k));
  }
  return a;
}

ScalarCPWL knotted(const std::vector<double>& knots, const std::vector<double>& slopes) {
  if (knots.empty()) return ScalarCPWL::affine(slopes[0], 0.0);
  return ScalarCPWL(knots, slopes, 0.0);
}

}  // namespace

NetworkSpec general_position_partitions(std::size_t d, const std::vector<std::size_t>& ns,
                                        std::uint64_t seed) {
  const Arrangement a = random_arrangement(d, ns, seed);
  const auto N = static_cast<Eigen::Index>(ns.size());
  NetworkSpec net;
  net.input_dim = d;
  net.metadata = "general_position_partitions";
  net.layers.emplace_back(AffineLayer{AffineMap(a.dirs, Vector::Zero(N))});
  std::vector<ScalarCPWL> units;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    std::vector<double> slopes;
    for (std::size_t p = 1; p <= ns[k]; ++p) slopes.push_back(static_cast<double>(p));
    units.push_back(knotted(a.knots[k], slopes));
  }
  net.layers.emplace_back(PointwiseLayer{std::move(units)});
  net.validate();
  return net;
}

NetworkSpec extremal_sum_network(std::size_t d, const std::vector<std::size_t>& ns,
                                 std::uint64_t seed) {
  const Arrangement a = random_arrangement(d, ns, seed);
  const auto N = static_cast<Eigen::Index>(ns.size());
  const double m = static_cast<double>(*std::max_element(ns.begin(), ns.end()));
  NetworkSpec net;
  net.input_dim = d;
  net.metadata = "extremal_sum_network";
  net.layers.emplace_back(AffineLayer{AffineMap(a.dirs, Vector::Zero(N))});
  std::vector<ScalarCPWL> units;
  double scale = 1.0;  // m^(k-1)
  for (std::size_t k = 0; k < ns.size(); ++k) {
    std::vector<double> slopes;
    for (std::size_t p = 1; p <= ns[k]; ++p) slopes.push_back(static_cast<double>(p) * scale);
    units.push_back(knotted(a.knots[k], slopes));
    scale *= m;
  }
  net.layers.emplace_back(PointwiseLayer{std::move(units)});
  net.layers.emplace_back(AffineLayer{AffineMap(Matrix::Ones(1, N), Vector::Zero(1))});
  net.validate();
  return net;
}

}  // namespace cpwl
