// SPDX-License-Identifier: Apache-2.0

#include "cpwl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/gmp.hpp>

#include "cpwl/lp.hpp"
#include "cpwl/parallel.hpp"
#include "cpwl/pieces.hpp"

namespace cpwl {

using Rational = boost::multiprecision::mpq_rational;

Domain Domain::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw std::invalid_argument("domain box: lo/hi length mismatch");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo(i) < hi(i))) throw std::invalid_argument("domain box: need lo < hi");
  }
  return Domain{true, std::move(lo), std::move(hi)};
}

Domain Domain::cube(std::size_t dim, double a, double b) {
  const auto n = static_cast<Eigen::Index>(dim);
  return box(Vector::Constant(n, a), Vector::Constant(n, b));
}

bool Region::contains(const Vector& x, double tol) const {
  for (const auto& h : constraints) {
    const double scale = std::max(1.0, h.normal.norm()) * std::max(1.0, x.norm());
    if (h.eval(x) < -tol * scale) return false;
  }
  return true;
}

namespace {

// ------------------------------------------------------------ scalar traits

template <class S>
struct Num;

template <>
struct Num<double> {
  static constexpr double kNormalTol = 1e-12;
  static constexpr double kConstTol = 1e-12;
  static double pivot_eps() { return 1e-11; }
  static double scale_of(const VecT<double>& a) { return a.norm(); }
  static bool negligible(const VecT<double>& a, double c) {
    return a.norm() < kNormalTol * std::max(1.0, std::abs(c));
  }
  // sign of a constant constraint value with the given magnitude scale
  static int sign(double c, double scale) {
    if (std::abs(c) <= kConstTol * std::max(1.0, scale)) return 0;
    return c > 0 ? 1 : -1;
  }
  static bool positive(double e, double eps_int) { return e > eps_int; }
  static double to_double(double v) { return v; }
  static double from_double(double v) { return v; }
  static double abs(double v) { return std::abs(v); }
};

template <>
struct Num<Rational> {
  static Rational pivot_eps() { return Rational(0); }
  static Rational scale_of(const VecT<Rational>& a) {
    Rational m(0);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Rational v = boost::multiprecision::abs(a(i));
      if (v > m) m = v;
    }
    return m;
  }
  static bool negligible(const VecT<Rational>& a, const Rational&) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a(i) != 0) return false;
    }
    return true;
  }
  static int sign(const Rational& c, const Rational&) { return c > 0 ? 1 : (c < 0 ? -1 : 0); }
  static bool positive(const Rational& e, double) { return e > 0; }
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_double(double v) { return Rational(v); }
  static Rational abs(const Rational& v) { return boost::multiprecision::abs(v); }
};

template <class S>
S dot(const VecT<S>& a, const VecT<S>& b) {
  S s(0);
  for (Eigen::Index i = 0; i < a.size(); ++i) s += a(i) * b(i);
  return s;
}

template <class S>
struct HalfT {
  VecT<S> a;
  S c;
  bool margin = true;  // false: plain inequality inside the interior LP
};

template <class S>
struct CellT {
  std::vector<HalfT<S>> cons;
  AffineT<S> piece;
  VecT<S> witness;
  S radius{};
  std::vector<int> pattern;
  PieceChoice partial;
};

enum class Verdict { real, yes, no, tie };

template <class S>
Verdict classify(const VecT<S>& a, const S& c) {
  if (!Num<S>::negligible(a, c)) return Verdict::real;
  const int s = Num<S>::sign(c, Num<S>::abs(c));
  return s > 0 ? Verdict::yes : (s < 0 ? Verdict::no : Verdict::tie);
}

// ------------------------------------------------------------ LP wrappers

template <class S>
class Engine {
 public:
  Engine(std::size_t dim, const Domain& domain, const GeometryConfig& cfg)
      : dim_(dim), cfg_(cfg) {
    const auto n = static_cast<Eigen::Index>(dim);
    lo_.resize(n);
    hi_.resize(n);
    double half = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double l = domain.bounded ? domain.lo(j) : -cfg.r_max;
      const double h = domain.bounded ? domain.hi(j) : cfg.r_max;
      lo_(j) = Num<S>::from_double(l);
      hi_(j) = Num<S>::from_double(h);
      half = std::max(half, 0.5 * (h - l));
    }
    scale_ = Num<S>::from_double(half);
  }

  std::size_t dim() const { return dim_; }
  const GeometryConfig& config() const { return cfg_; }

  struct Witness {
    WitnessResult::Status status = WitnessResult::Status::empty;
    VecT<S> x;
    S eps{};
  };

  // Chebyshev LP in scaled shifted variables y' = (x - lo) / scale.
  Witness witness(const std::vector<HalfT<S>>& cons) const {
    const auto n = static_cast<Eigen::Index>(dim_);
    std::size_t rows = 2 * dim_;
    rows += cons.size();
    lp::Mat<S> A = lp::Mat<S>::Zero(static_cast<Eigen::Index>(rows), n + 1);
    lp::Vec<S> b = lp::Vec<S>::Zero(static_cast<Eigen::Index>(rows));
    Eigen::Index r = 0;
    for (const auto& h : cons) {
      const S nrm = Num<S>::scale_of(h.a);
      if (nrm == S(0)) {
        // constant constraint: c >= 0 must hold
        if (h.c < S(0)) return Witness{};
        continue;
      }
      // -a.y' * scale + e' * scale * nrm <= c + a.lo (all divided by scale*nrm)
      for (Eigen::Index j = 0; j < n; ++j) A(r, j) = -h.a(j) / nrm;
      A(r, n) = h.margin ? S(1) : S(0);
      b(r) = (h.c + dot(h.a, lo_)) / (nrm * scale_);
      ++r;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      A(r, j) = S(-1);
      A(r, n) = S(1);
      b(r) = S(0);
      ++r;
      A(r, j) = S(1);
      A(r, n) = S(1);
      b(r) = (hi_(j) - lo_(j)) / scale_;
      ++r;
    }
    A.conservativeResize(r, n + 1);
    b.conservativeResize(r);
    lp::Vec<S> c = lp::Vec<S>::Zero(n + 1);
    c(n) = S(1);
    const auto res = lp::maximize<S>(A, b, c, Num<S>::pivot_eps());
    Witness w;
    if (res.status != lp::Status::optimal) return w;
    w.x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) w.x(j) = res.x(j) * scale_ + lo_(j);
    w.eps = res.x(n) * scale_;
    w.status = Num<S>::positive(w.eps, cfg_.eps_interior) ? WitnessResult::Status::interior
                                                          : WitnessResult::Status::degenerate;
    return w;
  }

  // min and max of obj.x over the constraints; nullopt when infeasible.
  std::optional<std::pair<S, S>> range(const std::vector<HalfT<S>>& cons,
                                       const VecT<S>& obj) const {
    const auto n = static_cast<Eigen::Index>(dim_);
    lp::Mat<S> A = lp::Mat<S>::Zero(static_cast<Eigen::Index>(cons.size() + dim_), n);
    lp::Vec<S> b = lp::Vec<S>::Zero(static_cast<Eigen::Index>(cons.size() + dim_));
    Eigen::Index r = 0;
    for (const auto& h : cons) {
      const S nrm = Num<S>::scale_of(h.a);
      if (nrm == S(0)) {
        if (h.c < S(0)) return std::nullopt;
        continue;
      }
      for (Eigen::Index j = 0; j < n; ++j) A(r, j) = -h.a(j) / nrm;
      b(r) = (h.c + dot(h.a, lo_)) / (nrm * scale_);
      ++r;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      A(r, j) = S(1);
      b(r) = (hi_(j) - lo_(j)) / scale_;
      ++r;
    }
    A.conservativeResize(r, n);
    b.conservativeResize(r);
    const S base = dot(obj, lo_);
    lp::Vec<S> c = obj;
    const auto hi = lp::maximize<S>(A, b, c, Num<S>::pivot_eps());
    if (hi.status != lp::Status::optimal) return std::nullopt;
    lp::Vec<S> cneg = -obj;
    const auto lo = lp::maximize<S>(A, b, cneg, Num<S>::pivot_eps());
    if (lo.status != lp::Status::optimal) return std::nullopt;
    return std::make_pair(-lo.value * scale_ + base, hi.value * scale_ + base);
  }

 private:
  std::size_t dim_;
  GeometryConfig cfg_;
  VecT<S> lo_, hi_;
  S scale_;
};

// ---------------------------------------------------------- subdivision

// One candidate piece for a unit: its choice value(s) and the extra
// constraints (already classified as real).
template <class S>
struct Option {
  std::vector<int> choice;
  std::vector<HalfT<S>> cons;
};

template <class S>
HalfT<S> ge_zero(VecT<S> a, S c) {
  return HalfT<S>{std::move(a), std::move(c), true};
}

// Splits `cell` among `options` (assumed to cover it). Pushes survivors to
// `out`; `assign` writes an option's choice into a cell.
template <class S, class Assign, class Fallback>
void split_cell(const Engine<S>& eng, const CellT<S>& cell, std::vector<Option<S>>& options,
                Assign assign, Fallback fallback, std::vector<CellT<S>>& out) {
  // an option with no real constraint covers the whole cell
  for (auto& opt : options) {
    if (opt.cons.empty()) {
      CellT<S> c = cell;
      assign(c, opt.choice);
      out.push_back(std::move(c));
      return;
    }
  }
  std::vector<std::pair<std::size_t, typename Engine<S>::Witness>> alive;
  for (std::size_t i = 0; i < options.size(); ++i) {
    std::vector<HalfT<S>> all = cell.cons;
    all.insert(all.end(), options[i].cons.begin(), options[i].cons.end());
    auto w = eng.witness(all);
    if (w.status == WitnessResult::Status::interior) alive.emplace_back(i, std::move(w));
  }
  if (alive.empty()) {
    CellT<S> c = cell;
    fallback(c);
    out.push_back(std::move(c));
    return;
  }
  if (alive.size() == 1) {
    CellT<S> c = cell;
    assign(c, options[alive[0].first].choice);
    out.push_back(std::move(c));
    return;
  }
  for (auto& [i, w] : alive) {
    CellT<S> c = cell;
    c.cons.insert(c.cons.end(), options[i].cons.begin(), options[i].cons.end());
    c.witness = std::move(w.x);
    c.radius = std::move(w.eps);
    assign(c, options[i].choice);
    out.push_back(std::move(c));
  }
}

template <class S>
class Subdivider {
 public:
  Subdivider(const NetworkSpec& net, const Domain& domain, const GeometryConfig& cfg)
      : net_(net), widths_(net.widths()), eng_(net.input_dim, domain, cfg), cfg_(cfg) {}

  std::vector<CellT<S>> run() {
    const std::size_t d = net_.input_dim;
    CellT<S> root;
    root.piece = AffineT<S>::identity(d);
    auto w = eng_.witness({});
    if (w.status != WitnessResult::Status::interior) {
      throw std::runtime_error("domain has empty interior");
    }
    root.witness = w.x;
    root.radius = w.eps;
    std::vector<CellT<S>> cells{root};
    for (std::size_t l = 0; l < net_.layers.size(); ++l) {
      const LayerSpec& layer = net_.layers[l];
      const std::size_t in = widths_[l];
      if (std::holds_alternative<AffineLayer>(layer)) {
        const auto A = convert_affine<S>(std::get<AffineLayer>(layer).map);
        for (auto& c : cells) c.piece = A.after(c.piece);
        continue;
      }
      for (auto& c : cells) c.partial.assign(initial_choice_size(layer, in), -1);
      const std::size_t steps = unit_steps(layer, in);
      for (std::size_t u = 0; u < steps; ++u) {
        std::vector<std::vector<CellT<S>>> parts(cells.size());
        parallel_for(
            cells.size(), [&](std::size_t i) { refine(layer, l, in, u, cells[i], parts[i]); },
            cfg_.threads);
        std::vector<CellT<S>> next;
        std::size_t total = 0;
        for (const auto& p : parts) total += p.size();
        if (total > cfg_.max_cells) {
          throw BudgetExceeded("cell budget exceeded (" + std::to_string(total) + " > " +
                               std::to_string(cfg_.max_cells) + ")");
        }
        next.reserve(total);
        for (auto& p : parts) {
          for (auto& c : p) next.push_back(std::move(c));
        }
        cells = std::move(next);
      }
      for (auto& c : cells) {
        const auto A = local_affine_t<S>(layer, c.partial, in);
        c.piece = A.after(c.piece);
        c.pattern.insert(c.pattern.end(), c.partial.begin(), c.partial.end());
        c.partial.clear();
      }
    }
    std::stable_sort(cells.begin(), cells.end(),
                     [](const CellT<S>& a, const CellT<S>& b) { return a.pattern < b.pattern; });
    return cells;
  }

 private:
  static std::size_t initial_choice_size(const LayerSpec& layer, std::size_t in) {
    if (const auto* m = std::get_if<MaxoutLayer>(&layer)) return m->units.size();
    if (const auto* p = std::get_if<Pwlu2dLayer>(&layer)) return p->values.size();
    return in;
  }
  static std::size_t unit_steps(const LayerSpec& layer, std::size_t in) {
    if (const auto* g = std::get_if<GroupSortLayer>(&layer)) return in / g->group_size;
    return initial_choice_size(layer, in);
  }

  // Layer input at the witness, in double, for fallback selection.
  PieceChoice select_at_witness(const LayerSpec& layer, const CellT<S>& c) const {
    Vector x(c.witness.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = Num<S>::to_double(c.witness(j));
    const AffineMap p(c.piece.matrix.unaryExpr([](const S& v) { return Num<S>::to_double(v); }),
                      c.piece.offset.unaryExpr([](const S& v) { return Num<S>::to_double(v); }));
    const Vector z = p(x);
    return select_piece(layer, z, Vector::Zero(z.size()));
  }

  void refine(const LayerSpec& layer, std::size_t l, std::size_t in, std::size_t u,
              const CellT<S>& cell, std::vector<CellT<S>>& out) const {
    (void)l;
    (void)in;
    if (const auto* p = std::get_if<PointwiseLayer>(&layer)) {
      refine_pointwise(layer, p->units[u], u, cell, out);
    } else if (const auto* m = std::get_if<MaxoutLayer>(&layer)) {
      refine_maxout(layer, m->units[u], u, cell, out);
    } else if (const auto* g = std::get_if<GroupSortLayer>(&layer)) {
      refine_groupsort(layer, g->group_size, u, cell, out);
    } else {
      refine_pwlu(layer, std::get<Pwlu2dLayer>(layer), u, cell, out);
    }
  }

  VecT<S> row(const CellT<S>& c, std::size_t k) const {
    return c.piece.matrix.row(static_cast<Eigen::Index>(k)).transpose();
  }
  S off(const CellT<S>& c, std::size_t k) const {
    return c.piece.offset(static_cast<Eigen::Index>(k));
  }

  void refine_pointwise(const LayerSpec& layer, const ScalarCPWL& f, std::size_t k,
                        const CellT<S>& cell, std::vector<CellT<S>>& out) const {
    auto assign = [k](CellT<S>& c, const std::vector<int>& ch) { c.partial[k] = ch[0]; };
    auto fallback = [&](CellT<S>& c) { c.partial[k] = select_at_witness(layer, c)[k]; };
    const VecT<S> a = row(cell, k);
    const S q0 = off(cell, k);
    const std::size_t m = f.knot_count();
    std::vector<S> bp;
    for (double b : f.breakpoints()) bp.push_back(Num<S>::from_double(b));
    if (m == 0) {
      CellT<S> c = cell;
      c.partial[k] = 0;
      out.push_back(std::move(c));
      return;
    }
    if (Num<S>::negligible(a, q0)) {
      CellT<S> c = cell;
      c.partial[k] = static_cast<int>(f.piece_at(Num<S>::to_double(q0)));
      out.push_back(std::move(c));
      return;
    }
    std::size_t first = 0, last = m;  // candidate pieces [first, last]
    if (m >= 2) {
      const auto rg = eng_.range(cell.cons, a);
      if (rg) {
        const S qmin = rg->first + q0, qmax = rg->second + q0;
        while (first < m && !(qmin < bp[first])) ++first;
        while (last > 0 && !(qmax > bp[last - 1])) --last;
        if (first > last) first = last;
      }
    }
    std::vector<Option<S>> options;
    for (std::size_t j = first; j <= last; ++j) {
      Option<S> o;
      o.choice = {static_cast<int>(j)};
      bool possible = true;
      if (j > 0) add_constraint(o, a, S(q0 - bp[j - 1]), possible, true);
      if (j < m) add_constraint(o, VecT<S>(-a), S(bp[j] - q0), possible, true);
      if (possible) options.push_back(std::move(o));
    }
    split_cell(eng_, cell, options, assign, fallback, out);
  }

  // Adds a.x + c >= 0 to the option; `tie_ok` decides exact ties.
  static void add_constraint(Option<S>& o, VecT<S> a, S c, bool& possible, bool tie_ok) {
    switch (classify<S>(a, c)) {
      case Verdict::yes:
        return;
      case Verdict::no:
        possible = false;
        return;
      case Verdict::tie:
        if (!tie_ok) possible = false;
        return;
      case Verdict::real:
        o.cons.push_back(ge_zero<S>(std::move(a), std::move(c)));
        return;
    }
  }

  void refine_maxout(const LayerSpec& layer, const AffineMap& unit, std::size_t k,
                     const CellT<S>& cell, std::vector<CellT<S>>& out) const {
    auto assign = [k](CellT<S>& c, const std::vector<int>& ch) { c.partial[k] = ch[0]; };
    auto fallback = [&](CellT<S>& c) { c.partial[k] = select_at_witness(layer, c)[k]; };
    const AffineT<S> g = convert_affine<S>(unit).after(cell.piece);
    const auto K = static_cast<Eigen::Index>(unit.rows());
    std::vector<Option<S>> options;
    for (Eigen::Index j = 0; j < K; ++j) {
      Option<S> o;
      o.choice = {static_cast<int>(j)};
      bool possible = true;
      for (Eigen::Index i = 0; i < K && possible; ++i) {
        if (i == j) continue;
        VecT<S> a = (g.matrix.row(j) - g.matrix.row(i)).transpose();
        S c = g.offset(j) - g.offset(i);
        // identical functions: the lowest index wins
        add_constraint(o, std::move(a), std::move(c), possible, j < i);
      }
      if (possible) options.push_back(std::move(o));
    }
    split_cell(eng_, cell, options, assign, fallback, out);
  }

  void refine_groupsort(const LayerSpec& layer, std::size_t gs, std::size_t group,
                        const CellT<S>& cell, std::vector<CellT<S>>& out) const {
    const std::size_t base = group * gs;
    auto assign = [base](CellT<S>& c, const std::vector<int>& ch) {
      for (std::size_t r = 0; r < ch.size(); ++r) c.partial[base + r] = ch[r];
    };
    auto fallback = [&](CellT<S>& c) {
      const auto sel = select_at_witness(layer, c);
      for (std::size_t r = 0; r < gs; ++r) c.partial[base + r] = sel[base + r];
    };
    // enumerate chains z_{p0} <= z_{p1} <= ..., pruning empty prefixes
    std::vector<Option<S>> options;
    std::vector<int> perm;
    std::vector<bool> used(gs, false);
    Option<S> cur;
    std::function<void()> dfs = [&] {
      if (perm.size() == gs) {
        Option<S> o = cur;
        o.choice = perm;
        options.push_back(std::move(o));
        return;
      }
      for (std::size_t e = 0; e < gs; ++e) {
        if (used[e]) continue;
        const int idx = static_cast<int>(base + e);
        const std::size_t saved = cur.cons.size();
        bool possible = true;
        if (!perm.empty()) {
          const auto prev = static_cast<std::size_t>(perm.back());
          VecT<S> a = row(cell, static_cast<std::size_t>(idx)) - row(cell, prev);
          S c = off(cell, static_cast<std::size_t>(idx)) - off(cell, prev);
          add_constraint(cur, std::move(a), std::move(c), possible,
                         prev < static_cast<std::size_t>(idx));
          if (possible && cur.cons.size() > saved && perm.size() + 1 < gs) {
            std::vector<HalfT<S>> all = cell.cons;
            all.insert(all.end(), cur.cons.begin(), cur.cons.end());
            possible = eng_.witness(all).status == WitnessResult::Status::interior;
          }
        }
        if (possible) {
          used[e] = true;
          perm.push_back(idx);
          dfs();
          perm.pop_back();
          used[e] = false;
        }
        cur.cons.resize(saved);
      }
    };
    dfs();
    split_cell(eng_, cell, options, assign, fallback, out);
  }

  void refine_pwlu(const LayerSpec& layer, const Pwlu2dLayer& pw, std::size_t k,
                   const CellT<S>& cell, std::vector<CellT<S>>& out) const {
    auto assign = [k](CellT<S>& c, const std::vector<int>& ch) { c.partial[k] = ch[0]; };
    auto fallback = [&](CellT<S>& c) { c.partial[k] = select_at_witness(layer, c)[k]; };
    const AffineT<S> uv = convert_affine<S>(pw.readin[k]).after(cell.piece);
    const VecT<S> au = uv.matrix.row(0).transpose(), av = uv.matrix.row(1).transpose();
    const S cu = uv.offset(0), cv = uv.offset(1);
    // bounding ranges of u and v over the cell
    double umin = -INFINITY, umax = INFINITY, vmin = -INFINITY, vmax = INFINITY;
    if (Num<S>::negligible(au, cu)) {
      umin = umax = Num<S>::to_double(cu);
    } else if (auto r = eng_.range(cell.cons, au)) {
      umin = Num<S>::to_double(r->first + cu);
      umax = Num<S>::to_double(r->second + cu);
    }
    if (Num<S>::negligible(av, cv)) {
      vmin = vmax = Num<S>::to_double(cv);
    } else if (auto r = eng_.range(cell.cons, av)) {
      vmin = Num<S>::to_double(r->first + cv);
      vmax = Num<S>::to_double(r->second + cv);
    }
    const std::size_t n = pw.grid_m - 1;
    const double h = 2.0 / static_cast<double>(n);
    const double slack = 1e-9;
    auto overlaps = [&](double lo, double hi, double qmin, double qmax) {
      return qmax >= lo - slack && qmin <= hi + slack;
    };
    auto piece_box = [&](std::size_t id, double& u0, double& u1, double& v0, double& v1) {
      const std::size_t t = 2 * n * n;
      if (id < t) {
        const std::size_t cellid = id / 2;
        u0 = -1.0 + h * static_cast<double>(cellid / n);
        v0 = -1.0 + h * static_cast<double>(cellid % n);
        u1 = u0 + h;
        v1 = v0 + h;
        return;
      }
      std::size_t r = id - t;
      if (r < 2 * n) {
        const bool right = r < n;
        const std::size_t j = right ? r : r - n;
        u0 = right ? 1.0 : -INFINITY;
        u1 = right ? INFINITY : -1.0;
        v0 = -1.0 + h * static_cast<double>(j);
        v1 = v0 + h;
        return;
      }
      r -= 2 * n;
      if (r < 2 * n) {
        const bool top = r < n;
        const std::size_t i = top ? r : r - n;
        v0 = top ? 1.0 : -INFINITY;
        v1 = top ? INFINITY : -1.0;
        u0 = -1.0 + h * static_cast<double>(i);
        u1 = u0 + h;
        return;
      }
      r -= 2 * n;
      u0 = (r & 1) ? 1.0 : -INFINITY;
      u1 = (r & 1) ? INFINITY : -1.0;
      v0 = (r & 2) ? 1.0 : -INFINITY;
      v1 = (r & 2) ? INFINITY : -1.0;
    };
    std::vector<Option<S>> options;
    for (std::size_t id = 0; id < pwlu_piece_count(pw.grid_m); ++id) {
      double u0, u1, v0, v1;
      piece_box(id, u0, u1, v0, v1);
      if (!overlaps(u0, u1, umin, umax) || !overlaps(v0, v1, vmin, vmax)) continue;
      const auto piece = pwlu_piece<S>(pw, k, id);
      Option<S> o;
      o.choice = {static_cast<int>(id)};
      bool possible = true;
      for (const auto& pc : piece.constraints) {
        VecT<S> a = au * pc.a_u + av * pc.a_v;
        S c = pc.a_u * cu + pc.a_v * cv + pc.c;
        add_constraint(o, std::move(a), std::move(c), possible, true);
        if (!possible) break;
      }
      if (possible) options.push_back(std::move(o));
    }
    split_cell(eng_, cell, options, assign, fallback, out);
  }

  const NetworkSpec& net_;
  std::vector<std::size_t> widths_;
  Engine<S> eng_;
  GeometryConfig cfg_;
};

template <class S>
std::vector<CellT<S>> subdivide(const NetworkSpec& net, const Domain& domain,
                                const GeometryConfig& cfg) {
  net.validate();
  if (net.input_dim > cfg.max_input_dim) {
    throw std::invalid_argument("input dimension " + std::to_string(net.input_dim) +
                                " exceeds the supported limit " +
                                std::to_string(cfg.max_input_dim));
  }
  if (domain.bounded && static_cast<std::size_t>(domain.lo.size()) != net.input_dim) {
    throw std::invalid_argument("domain dimension differs from network input dimension");
  }
  return Subdivider<S>(net, domain, cfg).run();
}

// ----------------------------------------------------------- double views

std::vector<HalfT<double>> to_halfs(const std::vector<HalfSpace>& cons) {
  std::vector<HalfT<double>> r;
  r.reserve(cons.size());
  for (const auto& h : cons) r.push_back(HalfT<double>{h.normal, h.offset, true});
  return r;
}

double piece_scale(const AffineMap& m) {
  return std::max({1.0, m.matrix.cwiseAbs().maxCoeff(), m.offset.cwiseAbs().maxCoeff()});
}

bool same_piece(const AffineMap& a, const AffineMap& b, double tol) {
  if (a.matrix.rows() != b.matrix.rows() || a.matrix.cols() != b.matrix.cols()) return false;
  const double s = std::max(piece_scale(a), piece_scale(b));
  return (a.matrix - b.matrix).cwiseAbs().maxCoeff() <= tol * s &&
         (a.offset - b.offset).cwiseAbs().maxCoeff() <= tol * s;
}

}  // namespace

// ------------------------------------------------------------ public API

WitnessResult interior_witness(const std::vector<HalfSpace>& constraints, std::size_t dim,
                               const Domain& domain, const GeometryConfig& cfg) {
  Engine<double> eng(dim, domain, cfg);
  auto w = eng.witness(to_halfs(constraints));
  WitnessResult r;
  r.status = w.status;
  r.point = w.x;
  r.epsilon = w.eps;
  return r;
}

std::optional<std::pair<double, double>> linear_range(const std::vector<HalfSpace>& constraints,
                                                      const Vector& objective,
                                                      const Domain& domain,
                                                      const GeometryConfig& cfg) {
  Engine<double> eng(static_cast<std::size_t>(objective.size()), domain, cfg);
  return eng.range(to_halfs(constraints), objective);
}

RegionSet enumerate_regions(const NetworkSpec& net, const Domain& domain,
                            const GeometryConfig& cfg) {
  auto cells = subdivide<double>(net, domain, cfg);
  RegionSet rs;
  rs.input_dim = net.input_dim;
  rs.domain = domain;
  rs.config = cfg;
  rs.regions.reserve(cells.size());
  for (auto& c : cells) {
    Region r;
    for (auto& h : c.cons) r.constraints.push_back(HalfSpace{std::move(h.a), h.c});
    r.piece = AffineMap(std::move(c.piece.matrix), std::move(c.piece.offset));
    r.witness = std::move(c.witness);
    r.radius = c.radius;
    r.pattern = std::move(c.pattern);
    rs.regions.push_back(std::move(r));
  }
  return rs;
}

ExactCount enumerate_regions_exact(const NetworkSpec& net, const Domain& domain,
                                   const GeometryConfig& cfg) {
  auto cells = subdivide<Rational>(net, domain, cfg);
  std::vector<std::vector<Rational>> keys;
  keys.reserve(cells.size());
  for (const auto& c : cells) {
    std::vector<Rational> k(c.piece.matrix.data(), c.piece.matrix.data() + c.piece.matrix.size());
    k.insert(k.end(), c.piece.offset.data(), c.piece.offset.data() + c.piece.offset.size());
    keys.push_back(std::move(k));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return ExactCount{cells.size(), keys.size()};
}

std::vector<std::size_t> piece_clusters(const RegionSet& rs, std::size_t* count) {
  std::vector<std::size_t> id(rs.regions.size());
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < rs.regions.size(); ++i) {
    std::size_t found = reps.size();
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if (same_piece(rs.regions[i].piece, rs.regions[reps[r]].piece, rs.config.piece_tol)) {
        found = r;
        break;
      }
    }
    if (found == reps.size()) reps.push_back(i);
    id[i] = found;
  }
  if (count) *count = reps.size();
  return id;
}

bool regions_adjacent(const Region& a, const Region& b, std::size_t dim, const Domain& domain,
                      const GeometryConfig& cfg) {
  const double tol = 1e-9;
  auto normalized = [](const HalfSpace& h) {
    const double n = h.normal.norm();
    return std::make_pair(Vector(h.normal / n), h.offset / n);
  };
  auto same_plane = [&](const HalfSpace& h, const Vector& n0, double c0) {
    const auto [n1, c1] = normalized(h);
    const double scale = std::max(1.0, std::abs(c0));
    return ((n1 - n0).norm() < tol && std::abs(c1 - c0) < tol * scale) ||
           ((n1 + n0).norm() < tol && std::abs(c1 + c0) < tol * scale);
  };
  Engine<double> eng(dim, domain, cfg);
  for (const auto& ha : a.constraints) {
    const auto [na, ca] = normalized(ha);
    bool opposite = false;
    for (const auto& hb : b.constraints) {
      const auto [nb, cb] = normalized(hb);
      if ((na + nb).norm() < tol && std::abs(ca + cb) < tol * std::max(1.0, std::abs(ca))) {
        opposite = true;
        break;
      }
    }
    if (!opposite) continue;
    std::vector<HalfT<double>> cons;
    for (const auto* set : {&a.constraints, &b.constraints}) {
      for (const auto& h : *set) {
        if (same_plane(h, na, ca)) continue;
        cons.push_back(HalfT<double>{h.normal, h.offset, true});
      }
    }
    cons.push_back(HalfT<double>{na, ca, false});
    cons.push_back(HalfT<double>{Vector(-na), -ca, false});
    if (eng.witness(cons).status == WitnessResult::Status::interior) return true;
  }
  return false;
}

CountReport count_report(const RegionSet& rs, const NetworkSpec& net) {
  CountReport r;
  r.cell_count = rs.regions.size();
  const auto id = piece_clusters(rs, &r.distinct_piece_count);
  // union-find over adjacent cells carrying the same piece
  std::vector<std::size_t> parent(rs.regions.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < rs.regions.size(); ++i) {
    for (std::size_t j = i + 1; j < rs.regions.size(); ++j) {
      if (id[i] == id[j]) pairs.emplace_back(i, j);
    }
  }
  std::vector<char> adjacent(pairs.size(), 0);
  parallel_for(
      pairs.size(),
      [&](std::size_t p) {
        adjacent[p] = regions_adjacent(rs.regions[pairs[p].first], rs.regions[pairs[p].second],
                                       rs.input_dim, rs.domain, rs.config)
                          ? 1
                          : 0;
      },
      rs.config.threads);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (adjacent[p]) parent[find(pairs[p].first)] = find(pairs[p].second);
  }
  std::size_t comps = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) comps += find(i) == i ? 1 : 0;
  r.connected_piece_count = comps;
  const auto ub = compositional_upper(descriptor_from_network(net));
  r.compositional_upper = ub.value;
  r.upper_factors = ub.factors;
  return r;
}

// ------------------------------------------------------------- rendering

std::vector<Vector> clip_region(const Region& region, const Vector& lo, const Vector& hi) {
  std::vector<Vector> poly;
  auto v = [](double x, double y) {
    Vector p(2);
    p << x, y;
    return p;
  };
  poly = {v(lo(0), lo(1)), v(hi(0), lo(1)), v(hi(0), hi(1)), v(lo(0), hi(1))};
  for (const auto& h : region.constraints) {
    if (poly.empty()) break;
    std::vector<Vector> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vector& p = poly[i];
      const Vector& q = poly[(i + 1) % poly.size()];
      const double fp = h.eval(p), fq = h.eval(q);
      if (fp >= 0) next.push_back(p);
      if ((fp >= 0) != (fq >= 0)) {
        const double t = fp / (fp - fq);
        next.push_back(p + t * (q - p));
      }
    }
    poly = std::move(next);
  }
  // drop degenerate slivers
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vector& p = poly[i];
    const Vector& q = poly[(i + 1) % poly.size()];
    area += p(0) * q(1) - q(0) * p(1);
  }
  const double box_area = (hi(0) - lo(0)) * (hi(1) - lo(1));
  if (poly.size() < 3 || std::abs(area) * 0.5 <= 1e-12 * box_area) poly.clear();
  return poly;
}

std::string render_svg(const RegionSet& rs, const Vector& lo, const Vector& hi,
                       const SvgStyle& style) {
  if (rs.input_dim != 2 || lo.size() != 2 || hi.size() != 2) {
    throw std::invalid_argument("render_svg: only 2D region sets can be rendered");
  }
  const auto id = piece_clusters(rs);
  auto sx = [&](double x) { return (x - lo(0)) / (hi(0) - lo(0)) * style.width; };
  auto sy = [&](double y) { return (hi(1) - y) / (hi(1) - lo(1)) * style.height; };
  std::ostringstream os;
  char buf[64];
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << style.width
     << "\" height=\"" << style.height << "\" viewBox=\"0 0 " << style.width << ' '
     << style.height << "\">\n";
  std::size_t drawn = 0;
  for (std::size_t i = 0; i < rs.regions.size(); ++i) {
    const auto poly = clip_region(rs.regions[i], lo, hi);
    if (poly.empty()) continue;
    // color from a hash of the piece cluster id
    std::uint64_t hsh = 0x9E3779B97F4A7C15ULL * (id[i] + 1);
    hsh ^= hsh >> 29;
    hsh *= 0xBF58476D1CE4E5B9ULL;
    hsh ^= hsh >> 32;
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<unsigned>(64 + (hsh & 0x7f)),
                  static_cast<unsigned>(64 + ((hsh >> 8) & 0x7f)),
                  static_cast<unsigned>(64 + ((hsh >> 16) & 0x7f)));
    os << "  <polygon data-cell=\"" << i << "\" data-piece=\"" << id[i] << "\" fill=\"" << buf
       << "\"";
    if (style.draw_edges) os << " stroke=\"#202020\" stroke-width=\"0.5\"";
    os << " points=\"";
    for (std::size_t k = 0; k < poly.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%s%.4f,%.4f", k ? " " : "", sx(poly[k](0)), sy(poly[k](1)));
      os << buf;
    }
    os << "\"/>\n";
    ++drawn;
  }
  if (style.annotate) {
    os << "  <text x=\"" << 8 << "\" y=\"" << style.height - 8
       << "\" font-family=\"sans-serif\" font-size=\"16\" fill=\"#000000\">(" << drawn
       << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace cpwl
