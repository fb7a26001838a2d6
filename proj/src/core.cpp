// SPDX-License-Identifier: Apache-2.0

#include "cpwl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cpwl/pieces.hpp"

namespace cpwl {

namespace {

std::string layer_message(std::size_t layer, const std::string& what) {
  if (layer == SpecError::npos) return what;
  std::ostringstream os;
  os << "layer " << layer << ": " << what;
  return os.str();
}

bool near(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

// Evaluation of a raw (possibly non-canonical) representation.
double raw_eval(const std::vector<double>& bp, const std::vector<double>& sl,
                double anchor, double t) {
  if (bp.empty()) return anchor + sl[0] * t;
  if (t <= bp[0]) return anchor + sl[0] * (t - bp[0]);
  double v = anchor;
  for (std::size_t i = 1; i < bp.size(); ++i) {
    if (t <= bp[i]) return v + sl[i] * (t - bp[i - 1]);
    v += sl[i] * (bp[i] - bp[i - 1]);
  }
  return v + sl.back() * (t - bp.back());
}


}  // namespace

SpecError::SpecError(std::size_t layer, const std::string& what)
    : std::runtime_error(layer_message(layer, what)), layer_(layer) {}

// ---------------------------------------------------------------- ScalarCPWL

ScalarCPWL::ScalarCPWL() : slopes_{1.0}, anchor_(0.0) {}

ScalarCPWL::ScalarCPWL(std::vector<double> breakpoints,
                       std::vector<double> slopes, double anchor_value)
    : breakpoints_(std::move(breakpoints)),
      slopes_(std::move(slopes)),
      anchor_(anchor_value) {
  if (slopes_.size() != breakpoints_.size() + 1) {
    throw std::invalid_argument("ScalarCPWL: need one more slope than breakpoints");
  }
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] >= breakpoints_[i - 1])) {
      throw std::invalid_argument("ScalarCPWL: breakpoints must be sorted");
    }
  }
  for (double v : breakpoints_) {
    if (!std::isfinite(v)) throw std::invalid_argument("ScalarCPWL: non-finite breakpoint");
  }
  for (double v : slopes_) {
    if (!std::isfinite(v)) throw std::invalid_argument("ScalarCPWL: non-finite slope");
  }
  canonicalize();
}

ScalarCPWL ScalarCPWL::affine(double slope, double intercept) {
  return ScalarCPWL({}, {slope}, intercept);
}
ScalarCPWL ScalarCPWL::relu() { return ScalarCPWL({0.0}, {0.0, 1.0}, 0.0); }
ScalarCPWL ScalarCPWL::leaky_relu(double negative_slope) {
  return ScalarCPWL({0.0}, {negative_slope, 1.0}, 0.0);
}
ScalarCPWL ScalarCPWL::abs() { return ScalarCPWL({0.0}, {-1.0, 1.0}, 0.0); }

void ScalarCPWL::canonicalize() {
  const std::vector<double> bp0 = breakpoints_;
  const std::vector<double> sl0 = slopes_;
  const double anchor0 = anchor_;

  // merge breakpoints that are too close; the sliver piece between them
  // is dropped
  std::vector<double> b;
  std::vector<double> s{sl0[0]};
  for (std::size_t i = 0; i < bp0.size(); ++i) {
    const double t = bp0[i];
    if (!b.empty() && t - b.back() < kBreakpointTol * std::max(1.0, std::abs(t))) {
      s.back() = sl0[i + 1];
      continue;
    }
    b.push_back(t);
    s.push_back(sl0[i + 1]);
  }
  // drop removable breakpoints
  std::vector<double> nb;
  std::vector<double> ns{s[0]};
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (near(ns.back(), s[i + 1], kSlopeTol)) continue;
    nb.push_back(b[i]);
    ns.push_back(s[i + 1]);
  }
  anchor_ = raw_eval(bp0, sl0, anchor0, nb.empty() ? 0.0 : nb[0]);
  breakpoints_ = std::move(nb);
  slopes_ = std::move(ns);
  knot_values_.assign(breakpoints_.size(), anchor_);
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    knot_values_[i] =
        knot_values_[i - 1] + slopes_[i] * (breakpoints_[i] - breakpoints_[i - 1]);
  }
}

double ScalarCPWL::operator()(double t) const {
  if (breakpoints_.empty()) return anchor_ + slopes_[0] * t;
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  const auto i = static_cast<std::size_t>(it - breakpoints_.begin());
  if (i == 0) return knot_values_[0] + slopes_[0] * (t - breakpoints_[0]);
  return knot_values_[i - 1] + slopes_[i] * (t - breakpoints_[i - 1]);
}

std::size_t ScalarCPWL::piece_at(double t, double direction) const {
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  auto i = static_cast<std::size_t>(it - breakpoints_.begin());
  // snap to a breakpoint within tolerance on either side
  if (i > 0 && near(t, breakpoints_[i - 1], kBreakpointTol)) {
    return direction < 0.0 ? i - 1 : i;
  }
  if (i < breakpoints_.size() && near(t, breakpoints_[i], kBreakpointTol)) {
    return direction < 0.0 ? i : i + 1;
  }
  return i;
}

double ScalarCPWL::intercept(std::size_t piece) const {
  if (breakpoints_.empty()) return anchor_;
  if (piece == 0) return knot_values_[0] - slopes_[0] * breakpoints_[0];
  return knot_values_[piece - 1] - slopes_[piece] * breakpoints_[piece - 1];
}

ScalarCPWL ScalarCPWL::canonical() const {
  return ScalarCPWL(breakpoints_, slopes_, anchor_);
}

bool ScalarCPWL::operator==(const ScalarCPWL& other) const {
  return breakpoints_ == other.breakpoints_ && slopes_ == other.slopes_ &&
         anchor_ == other.anchor_;
}

bool ScalarCPWL::approx_equal(const ScalarCPWL& other, double tol) const {
  auto close = [tol](double a, double b) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
  };
  if (breakpoints_.size() != other.breakpoints_.size()) return false;
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!close(breakpoints_[i], other.breakpoints_[i])) return false;
  }
  for (std::size_t i = 0; i < slopes_.size(); ++i) {
    if (!close(slopes_[i], other.slopes_[i])) return false;
  }
  return close(anchor_, other.anchor_);
}

namespace {

// Builds a canonical function from candidate breakpoints, sampling the
// slope of `slope_at` at the midpoint of every piece.
template <class SlopeAt, class ValueAt>
ScalarCPWL from_candidates(std::vector<double> cand, SlopeAt slope_at,
                           ValueAt value_at) {
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::vector<double> slopes;
  if (cand.empty()) {
    slopes.push_back(slope_at(0.0));
    return ScalarCPWL({}, slopes, value_at(0.0));
  }
  slopes.push_back(slope_at(cand.front() - 1.0));
  for (std::size_t i = 1; i < cand.size(); ++i) {
    slopes.push_back(slope_at(0.5 * (cand[i - 1] + cand[i])));
  }
  slopes.push_back(slope_at(cand.back() + 1.0));
  const double anchor = value_at(cand.front());
  return ScalarCPWL(std::move(cand), std::move(slopes), anchor);
}

}  // namespace

ScalarCPWL compose_scalar(const ScalarCPWL& outer, const ScalarCPWL& inner) {
  std::vector<double> cand = inner.breakpoints();
  const auto& ib = inner.breakpoints();
  for (std::size_t p = 0; p < inner.region_count(); ++p) {
    const double a = inner.slope(p);
    if (a == 0.0) continue;
    const double c = inner.intercept(p);
    const double lo = p == 0 ? -INFINITY : ib[p - 1];
    const double hi = p == ib.size() ? INFINITY : ib[p];
    for (double beta : outer.breakpoints()) {
      const double t = (beta - c) / a;
      if (t > lo && t < hi) cand.push_back(t);
    }
  }
  auto slope_at = [&](double t) {
    const std::size_t ip = inner.piece_at(t);
    const double a = inner.slope(ip);
    if (a == 0.0) return 0.0;
    return outer.slope(outer.piece_at(inner(t), a)) * a;
  };
  auto value_at = [&](double t) { return outer(inner(t)); };
  return from_candidates(std::move(cand), slope_at, value_at);
}

ScalarCPWL sum_scalar(const ScalarCPWL& f, const ScalarCPWL& g) {
  std::vector<double> cand = f.breakpoints();
  cand.insert(cand.end(), g.breakpoints().begin(), g.breakpoints().end());
  auto slope_at = [&](double t) {
    return f.slope(f.piece_at(t)) + g.slope(g.piece_at(t));
  };
  auto value_at = [&](double t) { return f(t) + g(t); };
  return from_candidates(std::move(cand), slope_at, value_at);
}

ScalarCPWL scale_scalar(const ScalarCPWL& f, double a, double c) {
  std::vector<double> slopes = f.slopes();
  for (double& s : slopes) s *= a;
  return ScalarCPWL(f.breakpoints(), std::move(slopes), a * f.anchor_value() + c);
}

// ------------------------------------------------------------------ AffineMap

AffineMap::AffineMap(Matrix m, Vector b) : matrix(std::move(m)), offset(std::move(b)) {
  if (offset.size() != matrix.rows()) {
    throw SpecError(SpecError::npos, "affine map: offset length must equal matrix rows");
  }
}

AffineMap AffineMap::identity(std::size_t n) {
  const auto k = static_cast<Eigen::Index>(n);
  return AffineMap(Matrix::Identity(k, k), Vector::Zero(k));
}

AffineMap AffineMap::after(const AffineMap& inner) const {
  return AffineMap(matrix * inner.matrix, matrix * inner.offset + offset);
}

// ------------------------------------------------------------------- network

std::size_t layer_output_dim(const LayerSpec& layer, std::size_t in_dim,
                             std::size_t index) {
  auto fail = [&](const std::string& what) -> std::size_t {
    throw SpecError(index, what);
  };
  if (const auto* a = std::get_if<AffineLayer>(&layer)) {
    if (a->map.cols() != in_dim) {
      return fail("affine layer expects " + std::to_string(a->map.cols()) +
                  " inputs, got " + std::to_string(in_dim));
    }
    if (static_cast<std::size_t>(a->map.offset.size()) != a->map.rows()) {
      return fail("affine offset length differs from matrix rows");
    }
    if (a->map.rows() == 0) return fail("affine layer has no outputs");
    return a->map.rows();
  }
  if (const auto* p = std::get_if<PointwiseLayer>(&layer)) {
    if (p->units.size() != in_dim) {
      return fail("pointwise layer has " + std::to_string(p->units.size()) +
                  " units for " + std::to_string(in_dim) + " inputs");
    }
    return in_dim;
  }
  if (const auto* m = std::get_if<MaxoutLayer>(&layer)) {
    if (m->rank < 1) return fail("maxout rank must be >= 1");
    if (m->units.empty()) return fail("maxout layer has no units");
    for (const auto& u : m->units) {
      if (u.rows() != m->rank) return fail("maxout unit must have rank rows");
      if (u.cols() != in_dim) return fail("maxout unit input width mismatch");
      if (static_cast<std::size_t>(u.offset.size()) != m->rank) {
        return fail("maxout unit offset length must equal rank");
      }
    }
    return m->units.size();
  }
  if (const auto* g = std::get_if<GroupSortLayer>(&layer)) {
    if (g->group_size < 1) return fail("group size must be >= 1");
    if (in_dim % g->group_size != 0) {
      return fail("input width " + std::to_string(in_dim) +
                  " not divisible by group size " + std::to_string(g->group_size));
    }
    return in_dim;
  }
  const auto& w = std::get<Pwlu2dLayer>(layer);
  if (w.grid_m < 2) return fail("PWLU grid size must be >= 2");
  if (w.values.empty()) return fail("PWLU layer has no units");
  if (w.values.size() != w.readin.size()) return fail("PWLU values/readin count mismatch");
  const auto m = static_cast<Eigen::Index>(w.grid_m);
  for (std::size_t k = 0; k < w.values.size(); ++k) {
    if (w.values[k].rows() != m || w.values[k].cols() != m) {
      return fail("PWLU control values must be M x M");
    }
    if (w.readin[k].rows() != 2 || w.readin[k].cols() != in_dim ||
        w.readin[k].offset.size() != 2) {
      return fail("PWLU read-in must be 2 x input width");
    }
  }
  return w.values.size();
}

std::vector<std::size_t> NetworkSpec::widths() const {
  if (input_dim < 1) throw SpecError(SpecError::npos, "input_dim must be positive");
  std::vector<std::size_t> w{input_dim};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    w.push_back(layer_output_dim(layers[i], w.back(), i));
  }
  return w;
}

namespace {

double pwlu_eval_unit(const Pwlu2dLayer& layer, std::size_t unit, double u,
                      double v) {
  const int id = pwlu_piece_id(layer.grid_m, u, v, 0.0, 0.0);
  const auto p = pwlu_piece<double>(layer, unit, static_cast<std::size_t>(id));
  return p.grad_u * u + p.grad_v * v + p.c;
}

}  // namespace

Vector eval_layer(const LayerSpec& layer, const Vector& x) {
  if (const auto* a = std::get_if<AffineLayer>(&layer)) return a->map(x);
  if (const auto* p = std::get_if<PointwiseLayer>(&layer)) {
    Vector y(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      y(k) = p->units[static_cast<std::size_t>(k)](x(k));
    }
    return y;
  }
  if (const auto* m = std::get_if<MaxoutLayer>(&layer)) {
    Vector y(static_cast<Eigen::Index>(m->units.size()));
    for (std::size_t k = 0; k < m->units.size(); ++k) {
      y(static_cast<Eigen::Index>(k)) = m->units[k](x).maxCoeff();
    }
    return y;
  }
  if (const auto* g = std::get_if<GroupSortLayer>(&layer)) {
    Vector y = x;
    const auto gs = static_cast<Eigen::Index>(g->group_size);
    for (Eigen::Index s = 0; s < y.size(); s += gs) {
      std::sort(y.data() + s, y.data() + s + gs);
    }
    return y;
  }
  const auto& w = std::get<Pwlu2dLayer>(layer);
  Vector y(static_cast<Eigen::Index>(w.values.size()));
  for (std::size_t k = 0; k < w.values.size(); ++k) {
    const Vector uv = w.readin[k](x);
    y(static_cast<Eigen::Index>(k)) = pwlu_eval_unit(w, k, uv(0), uv(1));
  }
  return y;
}

Vector eval(const NetworkSpec& net, const Vector& x) {
  const auto w = net.widths();
  if (static_cast<std::size_t>(x.size()) != net.input_dim) {
    throw SpecError(0, "input has length " + std::to_string(x.size()) +
                           ", network expects " + std::to_string(net.input_dim));
  }
  Vector cur = x;
  for (const auto& layer : net.layers) cur = eval_layer(layer, cur);
  return cur;
}

int pwlu_piece_id(std::size_t grid_m, double u, double v, double du, double dv) {
  const int n = static_cast<int>(grid_m) - 1;
  const double h = 2.0 / n;
  // -1 below the square, 0 inside (boundary included), +1 above
  auto zone = [](double q, double dq) {
    if (q > 1.0 && !near(q, 1.0, kBreakpointTol)) return 1;
    if (near(q, 1.0, kBreakpointTol) && dq > 0.0) return 1;
    if (q < -1.0 && !near(q, -1.0, kBreakpointTol)) return -1;
    if (near(q, -1.0, kBreakpointTol) && dq < 0.0) return -1;
    return 0;
  };
  // grid cell index along one axis, one-sided at grid lines
  auto cell = [&](double q, double dq, double& frac) {
    const double s = (q + 1.0) / h;
    const double r = std::round(s);
    int i;
    if (near(s, r, kBreakpointTol)) {
      i = static_cast<int>(r) - (dq < 0.0 ? 1 : 0);
    } else {
      i = static_cast<int>(std::floor(s));
    }
    i = std::clamp(i, 0, n - 1);
    frac = s - i;
    return i;
  };
  const int zu = zone(u, du), zv = zone(v, dv);
  const int t = 2 * n * n;
  double a = 0.0, b = 0.0;
  if (zu == 0 && zv == 0) {
    const int i = cell(u, du, a);
    const int j = cell(v, dv, b);
    bool lower_right;
    if (near(a, b, kBreakpointTol)) {
      lower_right = (du - dv) >= 0.0;
    } else {
      lower_right = a > b;
    }
    return 2 * (i * n + j) + (lower_right ? 0 : 1);
  }
  if (zu != 0 && zv == 0) {
    const int j = cell(v, dv, b);
    return t + (zu > 0 ? j : n + j);
  }
  if (zu == 0 && zv != 0) {
    const int i = cell(u, du, a);
    return t + 2 * n + (zv > 0 ? i : n + i);
  }
  return t + 4 * n + (zu > 0 ? 1 : 0) + (zv > 0 ? 2 : 0);
}

PieceChoice select_piece(const LayerSpec& layer, const Vector& x, const Vector& dx) {
  PieceChoice c;
  if (std::holds_alternative<AffineLayer>(layer)) return c;
  if (const auto* p = std::get_if<PointwiseLayer>(&layer)) {
    c.resize(static_cast<std::size_t>(x.size()));
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      c[static_cast<std::size_t>(k)] = static_cast<int>(
          p->units[static_cast<std::size_t>(k)].piece_at(x(k), dx(k)));
    }
    return c;
  }
  if (const auto* m = std::get_if<MaxoutLayer>(&layer)) {
    c.resize(m->units.size());
    for (std::size_t k = 0; k < m->units.size(); ++k) {
      const Vector z = m->units[k](x);
      const Vector dz = m->units[k].matrix * dx;
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < z.size(); ++j) {
        // j beats best if it is larger, or tied and growing faster
        const bool tie = near(z(j), z(best), kBreakpointTol);
        if ((!tie && z(j) > z(best)) ||
            (tie && dz(j) > dz(best) && !near(dz(j), dz(best), kBreakpointTol))) {
          best = j;
        }
      }
      c[k] = static_cast<int>(best);
    }
    return c;
  }
  if (const auto* g = std::get_if<GroupSortLayer>(&layer)) {
    const auto n = static_cast<std::size_t>(x.size());
    c.resize(n);
    const std::size_t gs = g->group_size;
    for (std::size_t s = 0; s < n; s += gs) {
      std::vector<int> idx(gs);
      std::iota(idx.begin(), idx.end(), static_cast<int>(s));
      // insertion sort keyed on (value, direction), stable on ties
      auto less = [&](int a, int b) {
        const double za = x(a), zb = x(b);
        if (!near(za, zb, kBreakpointTol)) return za < zb;
        return dx(a) < dx(b) && !near(dx(a), dx(b), kBreakpointTol);
      };
      for (std::size_t i = 1; i < gs; ++i) {
        for (std::size_t j = i; j > 0 && less(idx[j], idx[j - 1]); --j) {
          std::swap(idx[j], idx[j - 1]);
        }
      }
      for (std::size_t r = 0; r < gs; ++r) c[s + r] = idx[r];
    }
    return c;
  }
  const auto& w = std::get<Pwlu2dLayer>(layer);
  c.resize(w.values.size());
  for (std::size_t k = 0; k < w.values.size(); ++k) {
    const Vector uv = w.readin[k](x);
    const Vector duv = w.readin[k].matrix * dx;
    c[k] = pwlu_piece_id(w.grid_m, uv(0), uv(1), duv(0), duv(1));
  }
  return c;
}

AffineMap local_affine(const LayerSpec& layer, const PieceChoice& choice,
                       std::size_t in_dim) {
  return to_double(local_affine_t<double>(layer, choice, in_dim));
}

LocalAffine eval_jacobian(const NetworkSpec& net, const Vector& x, const Vector& side) {
  const auto w = net.widths();
  if (static_cast<std::size_t>(x.size()) != net.input_dim ||
      static_cast<std::size_t>(side.size()) != net.input_dim) {
    throw SpecError(0, "input or direction length differs from input_dim");
  }
  LocalAffine r{x, AffineMap::identity(net.input_dim)};
  Vector dir = side;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const PieceChoice choice = select_piece(layer, r.value, dir);
    const AffineMap piece = local_affine(layer, choice, w[i]);
    r.map = piece.after(r.map);
    r.value = eval_layer(layer, r.value);
    dir = piece.matrix * dir;
  }
  return r;
}

NetworkSpec concat(const NetworkSpec& first, const NetworkSpec& second) {
  const std::size_t out = first.output_dim();
  if (second.input_dim != out) {
    throw SpecError(first.layers.size(), "concat: output width " + std::to_string(out) +
                                             " differs from next input width " +
                                             std::to_string(second.input_dim));
  }
  NetworkSpec r = first;
  r.layers.insert(r.layers.end(), second.layers.begin(), second.layers.end());
  if (!second.metadata.empty()) {
    r.metadata = first.metadata.empty() ? second.metadata
                                        : first.metadata + "+" + second.metadata;
  }
  return r;
}

NetworkSpec affine_network(const AffineMap& map, std::string metadata) {
  NetworkSpec n;
  n.input_dim = map.cols();
  n.layers.emplace_back(AffineLayer{map});
  n.metadata = std::move(metadata);
  n.validate();
  return n;
}

NetworkSpec scalar_network(const ScalarCPWL& f, std::string metadata) {
  NetworkSpec n;
  n.input_dim = 1;
  n.layers.emplace_back(PointwiseLayer{{f}});
  n.metadata = std::move(metadata);
  return n;
}

}  // namespace cpwl
