// SPDX-License-Identifier: Apache-2.0

#include "cpwl/paths.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "cpwl/parallel.hpp"
#include "cpwl/pieces.hpp"

namespace cpwl {

double PolygonalPath::length() const {
  double s = 0.0;
  for (std::size_t i = 0; i < segments(); ++i) s += segment_length(i);
  return s;
}

Vector PolygonalPath::point_at(double t) const {
  if (vertices.empty()) throw std::invalid_argument("point_at: empty path");
  double acc = 0.0;
  for (std::size_t i = 0; i < segments(); ++i) {
    const double len = segment_length(i);
    if (t <= acc + len || i + 1 == segments()) {
      const double s = std::clamp(t - acc, 0.0, len);
      return vertices[i] + (vertices[i + 1] - vertices[i]) * (len > 0.0 ? s / len : 0.0);
    }
    acc += len;
  }
  return vertices.front();
}

PolygonalPath PolygonalPath::reversed() const {
  PolygonalPath p{vertices};
  std::reverse(p.vertices.begin(), p.vertices.end());
  return p;
}

void PolygonalPath::validate() const {
  if (vertices.size() < 2) throw std::invalid_argument("path needs at least 2 vertices");
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].size() != vertices[0].size()) {
      throw std::invalid_argument("path vertices have inconsistent dimensions");
    }
    if (i > 0 && vertices[i] == vertices[i - 1]) {
      throw std::invalid_argument("consecutive path vertices must be distinct");
    }
  }
}

namespace {

// One parameter interval of a segment with the network's affine map in input
// space and the active piece of every layer (empty for affine layers).
struct Interval {
  double s0 = 0.0, s1 = 0.0;
  AffineMap map;
  std::vector<PieceChoice> choices;
};

using Line = std::tuple<double, double, double>;  // a_u * u + a_v * v + c = 0

// Distinct boundary lines of every PWLU unit, per layer index.
using PwluLines = std::map<std::size_t, std::vector<std::vector<Line>>>;

PwluLines pwlu_lines(const NetworkSpec& net) {
  PwluLines out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto* p = std::get_if<Pwlu2dLayer>(&net.layers[i]);
    if (!p) continue;
    auto& units = out[i];
    for (std::size_t k = 0; k < p->values.size(); ++k) {
      std::vector<Line> lines;
      for (const auto& piece : pwlu_pieces<double>(*p, k)) {
        for (const auto& c : piece.constraints) {
          // normalize sign and scale so duplicates collapse
          double s = std::max(std::abs(c.a_u), std::abs(c.a_v));
          if (s == 0.0) continue;
          if (c.a_u < 0.0 || (c.a_u == 0.0 && c.a_v < 0.0)) s = -s;
          lines.emplace_back(c.a_u / s, c.a_v / s, c.c / s);
        }
      }
      std::sort(lines.begin(), lines.end());
      lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
      units.push_back(std::move(lines));
    }
  }
  return out;
}

// Parameters in (s0, s1) where a unit of `layer` may switch pieces, for
// layer input z0 + s * z1.
std::vector<double> crossings(const LayerSpec& layer, const std::vector<std::vector<Line>>* lines,
                              const Vector& z0, const Vector& z1, double s0, double s1) {
  std::vector<double> out;
  auto add = [&](double num, double den) {
    if (den == 0.0) return;
    const double s = num / den;
    if (s > s0 && s < s1) out.push_back(s);
  };
  if (const auto* p = std::get_if<PointwiseLayer>(&layer)) {
    for (std::size_t k = 0; k < p->units.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      for (double b : p->units[k].breakpoints()) add(b - z0[e], z1[e]);
    }
  } else if (const auto* m = std::get_if<MaxoutLayer>(&layer)) {
    for (const auto& unit : m->units) {
      const Vector a = unit.matrix * z0 + unit.offset;
      const Vector b = unit.matrix * z1;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        for (Eigen::Index j = i + 1; j < a.size(); ++j) add(a[j] - a[i], b[i] - b[j]);
      }
    }
  } else if (const auto* g = std::get_if<GroupSortLayer>(&layer)) {
    const auto gs = static_cast<Eigen::Index>(g->group_size);
    for (Eigen::Index base = 0; base < z0.size(); base += gs) {
      for (Eigen::Index i = base; i < base + gs; ++i) {
        for (Eigen::Index j = i + 1; j < base + gs; ++j) add(z0[j] - z0[i], z1[i] - z1[j]);
      }
    }
  } else if (const auto* w = std::get_if<Pwlu2dLayer>(&layer)) {
    for (std::size_t k = 0; k < w->readin.size(); ++k) {
      const Vector uv0 = w->readin[k](z0);
      const Vector duv = w->readin[k].matrix * z1;
      for (const auto& [au, av, c] : (*lines)[k]) {
        add(-(au * uv0[0] + av * uv0[1] + c), au * duv[0] + av * duv[1]);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Interval> segment_profile(const NetworkSpec& net, const PwluLines& lines,
                                      const Vector& a, const Vector& u, double len) {
  const auto widths = net.widths();
  std::vector<Interval> cur(1);
  cur[0].s0 = 0.0;
  cur[0].s1 = len;
  cur[0].map = AffineMap::identity(net.input_dim);
  cur[0].choices.resize(net.layers.size());
  const double tol = 1e-13 * std::max(1.0, len);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& layer = net.layers[li];
    if (const auto* aff = std::get_if<AffineLayer>(&layer)) {
      for (auto& iv : cur) iv.map = aff->map.after(iv.map);
      continue;
    }
    const auto it = lines.find(li);
    const auto* unit_lines = it == lines.end() ? nullptr : &it->second;
    std::vector<Interval> next;
    for (const auto& iv : cur) {
      const Vector z0 = iv.map(a);
      const Vector z1 = iv.map.matrix * u;
      std::vector<double> cuts{iv.s0};
      for (double s : crossings(layer, unit_lines, z0, z1, iv.s0, iv.s1)) {
        if (s - cuts.back() > tol && iv.s1 - s > tol) cuts.push_back(s);
      }
      cuts.push_back(iv.s1);
      std::size_t start = next.size();
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
        PieceChoice choice = select_piece(layer, z0 + mid * z1, z1);
        if (next.size() > start && next.back().choices[li] == choice) {
          next.back().s1 = cuts[c + 1];
          continue;
        }
        Interval piece;
        piece.s0 = cuts[c];
        piece.s1 = cuts[c + 1];
        piece.choices = iv.choices;
        piece.choices[li] = std::move(choice);
        next.push_back(std::move(piece));
      }
      for (std::size_t k = start; k < next.size(); ++k) {
        next[k].map = local_affine(layer, next[k].choices[li], widths[li]).after(iv.map);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

bool maps_differ(const AffineMap& p, const AffineMap& q) {
  const double scale = std::max({1.0, p.matrix.cwiseAbs().maxCoeff(), q.matrix.cwiseAbs().maxCoeff(),
                                 p.offset.size() ? p.offset.cwiseAbs().maxCoeff() : 0.0,
                                 q.offset.size() ? q.offset.cwiseAbs().maxCoeff() : 0.0});
  const double dm = (p.matrix - q.matrix).cwiseAbs().maxCoeff();
  const double dc = p.offset.size() ? (p.offset - q.offset).cwiseAbs().maxCoeff() : 0.0;
  return std::max(dm, dc) > kKnotTol * scale;
}

// Number of unit switches between two piece choices of one layer.
std::size_t switches(const LayerSpec& layer, const PieceChoice& p, const PieceChoice& q) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < p.size() && i < q.size(); ++i) diff += p[i] != q[i];
  if (std::holds_alternative<GroupSortLayer>(layer)) return (diff + 1) / 2;
  return diff;
}

Knot make_knot(const NetworkSpec* net, const Interval& left, const Interval& right, double t,
               std::size_t segment, bool at_vertex) {
  Knot k;
  k.t = t;
  k.segment = segment;
  k.at_vertex = at_vertex;
  if (net && !left.choices.empty()) {
    std::size_t events = 0;
    for (std::size_t li = 0; li < net->layers.size(); ++li) {
      if (left.choices[li] == right.choices[li]) continue;
      if (k.layer < 0) k.layer = static_cast<long>(li);
      events += switches(net->layers[li], left.choices[li], right.choices[li]);
    }
    k.degenerate = events > 1;
  }
  return k;
}

KnotReport knots_from_profiles(const NetworkSpec* net, const PolygonalPath& path,
                               const std::vector<std::vector<Interval>>& profiles) {
  KnotReport r;
  double offset = 0.0;
  for (std::size_t seg = 0; seg < profiles.size(); ++seg) {
    const auto& ivs = profiles[seg];
    for (std::size_t i = 0; i + 1 < ivs.size(); ++i) {
      if (maps_differ(ivs[i].map, ivs[i + 1].map)) {
        r.knots.push_back(make_knot(net, ivs[i], ivs[i + 1], offset + ivs[i].s1, seg, false));
      }
    }
    offset += path.segment_length(seg);
    if (seg + 1 < profiles.size()) {
      const auto& left = ivs.back();
      const auto& right = profiles[seg + 1].front();
      if (maps_differ(left.map, right.map)) {
        r.knots.push_back(make_knot(net, left, right, offset, seg, true));
      }
    }
  }
  r.count = r.knots.size();
  r.length = path.length();
  r.density = static_cast<double>(r.count) / r.length;
  for (const auto& k : r.knots) r.degenerate_count += k.degenerate;
  return r;
}

std::vector<std::vector<Interval>> path_profiles(const NetworkSpec& net, const PolygonalPath& path,
                                                 std::size_t threads) {
  path.validate();
  if (path.dim() != net.input_dim) {
    throw std::invalid_argument("path dimension does not match the network input");
  }
  const PwluLines lines = pwlu_lines(net);
  std::vector<std::vector<Interval>> profiles(path.segments());
  parallel_for(
      path.segments(),
      [&](std::size_t seg) {
        const double len = path.segment_length(seg);
        const Vector u = (path.vertices[seg + 1] - path.vertices[seg]) / len;
        profiles[seg] = segment_profile(net, lines, path.vertices[seg], u, len);
      },
      threads);
  return profiles;
}

// Common refinement of two interval lists of one segment.
std::vector<Interval> merge_profiles(const std::vector<Interval>& p, const std::vector<Interval>& q,
                                     bool stacked) {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < p.size() && j < q.size()) {
    const double end = std::min(p[i].s1, q[j].s1);
    Interval iv;
    iv.s0 = s;
    iv.s1 = end;
    if (stacked) {
      Matrix m(p[i].map.matrix.rows() + q[j].map.matrix.rows(), p[i].map.matrix.cols());
      m << p[i].map.matrix, q[j].map.matrix;
      Vector c(p[i].map.offset.size() + q[j].map.offset.size());
      c << p[i].map.offset, q[j].map.offset;
      iv.map = AffineMap(std::move(m), std::move(c));
    } else {
      iv.map = AffineMap(p[i].map.matrix + q[j].map.matrix, p[i].map.offset + q[j].map.offset);
    }
    out.push_back(std::move(iv));
    s = end;
    if (p[i].s1 <= end) ++i;
    if (j < q.size() && q[j].s1 <= end) ++j;
  }
  return out;
}

}  // namespace

KnotReport count_knots(const NetworkSpec& net, const PolygonalPath& path, std::size_t threads) {
  return knots_from_profiles(&net, path, path_profiles(net, path, threads));
}

KnotReport count_knots_pair(const NetworkSpec& f1, const NetworkSpec& f2,
                            const PolygonalPath& path, bool stacked, std::size_t threads) {
  if (!stacked && f1.output_dim() != f2.output_dim()) {
    throw std::invalid_argument("sum of networks with different output dimensions");
  }
  const auto p1 = path_profiles(f1, path, threads);
  const auto p2 = path_profiles(f2, path, threads);
  std::vector<std::vector<Interval>> merged(p1.size());
  for (std::size_t seg = 0; seg < p1.size(); ++seg) {
    merged[seg] = merge_profiles(p1[seg], p2[seg], stacked);
  }
  return knots_from_profiles(nullptr, path, merged);
}

PolygonalPath image_path(const NetworkSpec& net, const PolygonalPath& path) {
  const auto profiles = path_profiles(net, path, 1);
  PolygonalPath out;
  auto push = [&](const Vector& y) {
    if (out.vertices.empty() || out.vertices.back() != y) out.vertices.push_back(y);
  };
  for (std::size_t seg = 0; seg < profiles.size(); ++seg) {
    const Vector& a = path.vertices[seg];
    const Vector u = (path.vertices[seg + 1] - a) / path.segment_length(seg);
    for (const auto& iv : profiles[seg]) push(iv.map(a + iv.s0 * u));
    const auto& last = profiles[seg].back();
    push(last.map(a + last.s1 * u));
  }
  return out;
}

double image_length(const NetworkSpec& net, const PolygonalPath& path) {
  const auto profiles = path_profiles(net, path, 1);
  double total = 0.0;
  for (std::size_t seg = 0; seg < profiles.size(); ++seg) {
    const Vector u = (path.vertices[seg + 1] - path.vertices[seg]) / path.segment_length(seg);
    for (const auto& iv : profiles[seg]) total += (iv.map.matrix * u).norm() * (iv.s1 - iv.s0);
  }
  return total;
}

namespace {

InequalityCheck inequality(std::string name, std::size_t lhs, std::size_t rhs, double len) {
  InequalityCheck c;
  c.name = std::move(name);
  c.lhs_knots = lhs;
  c.rhs_knots = rhs;
  c.lhs = static_cast<double>(lhs) / len;
  c.rhs = static_cast<double>(rhs) / len;
  c.pass = lhs <= rhs;
  return c;
}

}  // namespace

SubadditivityReport check_subadditivity(const NetworkSpec& f1, const NetworkSpec& f2,
                                        const PolygonalPath& path) {
  const double len = path.length();
  const std::size_t k1 = count_knots(f1, path).count;
  const std::size_t k2 = count_knots(f2, path).count;
  SubadditivityReport r;
  if (f1.output_dim() == f2.output_dim()) {
    r.sum = inequality("sum", count_knots_pair(f1, f2, path, false).count, k1 + k2, len);
  } else {
    r.sum = inequality("sum (not applicable)", 0, k1 + k2, len);
  }
  r.stacked = inequality("stacked", count_knots_pair(f1, f2, path, true).count, k1 + k2, len);
  return r;
}

InequalityCheck check_composition_bound(const NetworkSpec& f1, const NetworkSpec& f2,
                                        const PolygonalPath& path) {
  if (f1.output_dim() != f2.input_dim) {
    throw std::invalid_argument("composition: output of f1 does not match input of f2");
  }
  const std::size_t lhs = count_knots(concat(f1, f2), path).count;
  const std::size_t k1 = count_knots(f1, path).count;
  const PolygonalPath img = image_path(f1, path);
  const std::size_t k2 = img.vertices.size() >= 2 ? count_knots(f2, img).count : 0;
  return inequality("composition", lhs, k1 + k2, path.length());
}

}  // namespace cpwl
