// SPDX-License-Identifier: Apache-2.0

#include "cpwl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "cpwl/parallel.hpp"

namespace cpwl {

namespace {

struct Sample {
  std::vector<double> jac;
  std::vector<double> off;
};

Sample sample_at(const NetworkSpec& net, const Vector& x, const Vector& side) {
  const LocalAffine la = eval_jacobian(net, x, side);
  Sample s;
  s.jac.assign(la.map.matrix.data(), la.map.matrix.data() + la.map.matrix.size());
  s.off.assign(la.map.offset.data(), la.map.offset.data() + la.map.offset.size());
  return s;
}

double max_abs(const std::vector<Sample>& samples, bool jac) {
  double m = 1.0;
  for (const auto& s : samples) {
    for (double v : jac ? s.jac : s.off) m = std::max(m, std::abs(v));
  }
  return m;
}

// Assigns fingerprint ids: entries are rounded on a grid of
// kFingerprintRounding times the largest magnitude; a sample whose rounded
// key is new is still matched to an existing fingerprint within one
// rounding step, so float noise across a rounding boundary does not split a
// piece.
std::vector<std::size_t> fingerprint_ids(const std::vector<Sample>& samples, std::size_t* distinct) {
  const double qj = kFingerprintRounding * max_abs(samples, true);
  const double qo = kFingerprintRounding * max_abs(samples, false);
  std::map<std::vector<long long>, std::size_t> by_key;
  std::vector<const Sample*> reps;
  std::vector<std::size_t> ids(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    std::vector<long long> key;
    key.reserve(s.jac.size() + s.off.size());
    for (double v : s.jac) key.push_back(std::llround(v / qj));
    for (double v : s.off) key.push_back(std::llround(v / qo));
    const auto it = by_key.find(key);
    if (it != by_key.end()) {
      ids[i] = it->second;
      continue;
    }
    std::size_t id = reps.size();
    for (std::size_t r = 0; r < reps.size(); ++r) {
      bool close = true;
      for (std::size_t j = 0; close && j < s.jac.size(); ++j) close = std::abs(s.jac[j] - reps[r]->jac[j]) <= qj;
      for (std::size_t j = 0; close && j < s.off.size(); ++j) close = std::abs(s.off[j] - reps[r]->off[j]) <= qo;
      if (close) {
        id = r;
        break;
      }
    }
    if (id == reps.size()) reps.push_back(&s);
    by_key.emplace(std::move(key), id);
    ids[i] = id;
  }
  *distinct = reps.size();
  return ids;
}

std::size_t find(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

GridCount grid_region_count(const NetworkSpec& net, const Vector& lo, const Vector& hi,
                            std::size_t resolution, std::size_t threads) {
  const std::size_t d = net.input_dim;
  if (d != 1 && d != 2) throw std::invalid_argument("grid oracle needs input dimension 1 or 2");
  if (resolution < 8) throw std::invalid_argument("grid oracle needs resolution >= 8");
  if (static_cast<std::size_t>(lo.size()) != d || static_cast<std::size_t>(hi.size()) != d) {
    throw std::invalid_argument("grid oracle box dimension mismatch");
  }
  const std::size_t rows = d == 2 ? resolution : 1;
  const std::size_t total = rows * resolution;
  Vector side(static_cast<Eigen::Index>(d));
  side[0] = 1.0;
  if (d == 2) side[1] = 0.6180339887498949;
  std::vector<Sample> samples(total);
  parallel_for(
      rows,
      [&](std::size_t r) {
        Vector x(static_cast<Eigen::Index>(d));
        for (std::size_t c = 0; c < resolution; ++c) {
          x[0] = lo[0] + (hi[0] - lo[0]) * (static_cast<double>(c) + 0.5) / static_cast<double>(resolution);
          if (d == 2) {
            x[1] = lo[1] + (hi[1] - lo[1]) * (static_cast<double>(r) + 0.5) / static_cast<double>(resolution);
          }
          samples[r * resolution + c] = sample_at(net, x, side);
        }
      },
      threads);
  GridCount g;
  g.resolution = resolution;
  g.ids = fingerprint_ids(samples, &g.distinct);
  std::vector<std::size_t> parent(total);
  std::iota(parent.begin(), parent.end(), 0);
  auto unite = [&](std::size_t a, std::size_t b) {
    if (g.ids[a] == g.ids[b]) parent[find(parent, a)] = find(parent, b);
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      const std::size_t i = r * resolution + c;
      if (c + 1 < resolution) unite(i, i + 1);
      if (r + 1 < rows) unite(i, i + resolution);
    }
  }
  for (std::size_t i = 0; i < total; ++i) g.components += find(parent, i) == i;
  return g;
}

std::size_t grid_knot_count(const NetworkSpec& net, const Vector& a, const Vector& b,
                            std::size_t resolution, std::size_t threads) {
  if (resolution < 8) throw std::invalid_argument("grid oracle needs resolution >= 8");
  const Vector dir = b - a;
  std::vector<Sample> samples(resolution);
  parallel_for(
      resolution,
      [&](std::size_t i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(resolution);
        samples[i] = sample_at(net, a + t * dir, dir);
      },
      threads);
  std::size_t distinct = 0;
  const auto ids = fingerprint_ids(samples, &distinct);
  std::size_t changes = 0;
  for (std::size_t i = 1; i < ids.size(); ++i) changes += ids[i] != ids[i - 1];
  return changes;
}

double min_cell_radius(const RegionSet& rs) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rs.regions) m = std::min(m, r.radius);
  return m;
}

}  // namespace cpwl
