// SPDX-License-Identifier: Apache-2.0
//
// Scalar-generic views of the linear pieces of each layer type. The
// geometry engine instantiates these with double and with exact rationals.

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "cpwl/core.hpp"

namespace cpwl {

template <class S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct AffineT {
  MatT<S> matrix;
  VecT<S> offset;

  static AffineT identity(std::size_t n) {
    AffineT a;
    a.matrix = MatT<S>::Identity(n, n);
    a.offset = VecT<S>::Zero(n);
    return a;
  }
  AffineT after(const AffineT& inner) const {
    AffineT r;
    r.matrix = matrix * inner.matrix;
    r.offset = matrix * inner.offset + offset;
    return r;
  }
};

template <class S>
AffineT<S> convert_affine(const AffineMap& m) {
  AffineT<S> r;
  r.matrix = m.matrix.template cast<S>();
  r.offset = m.offset.template cast<S>();
  return r;
}

inline AffineMap to_double(const AffineT<double>& a) {
  return AffineMap(a.matrix, a.offset);
}

template <class S>
struct ScalarPiecesT {
  std::vector<S> breakpoints;
  std::vector<S> slopes;
  std::vector<S> intercepts;  // value = slope * t + intercept on the piece
};

/// Pieces of f computed in S from the stored doubles (exact for rationals).
template <class S>
ScalarPiecesT<S> scalar_pieces(const ScalarCPWL& f) {
  ScalarPiecesT<S> r;
  const auto& bp = f.breakpoints();
  const auto& sl = f.slopes();
  for (double b : bp) r.breakpoints.emplace_back(b);
  for (double s : sl) r.slopes.emplace_back(s);
  r.intercepts.resize(sl.size());
  if (bp.empty()) {
    r.intercepts[0] = S(f.anchor_value());
    return r;
  }
  // value at the first breakpoint is the anchor; walk right
  S value(f.anchor_value());
  r.intercepts[0] = value - r.slopes[0] * r.breakpoints[0];
  for (std::size_t i = 1; i < sl.size(); ++i) {
    if (i > 1) {
      value += r.slopes[i - 1] * (r.breakpoints[i - 1] - r.breakpoints[i - 2]);
    }
    r.intercepts[i] = value - r.slopes[i] * r.breakpoints[i - 1];
  }
  return r;
}

/// a_u * u + a_v * v + c >= 0 in the (u, v) plane of a PWLU unit.
template <class S>
struct PlaneConstraint {
  S a_u, a_v, c;
};

/// One convex piece of a PWLU unit over R^2 together with its affine
/// function grad_u * u + grad_v * v + c.
template <class S>
struct PwluPiece {
  std::vector<PlaneConstraint<S>> constraints;
  S grad_u, grad_v, c;
};

/// Number of pieces of one PWLU unit on R^2: 2(M-1)^2 triangles, 4(M-1)
/// boundary strips and 4 corners.
inline std::size_t pwlu_piece_count(std::size_t m) {
  return 2 * (m - 1) * (m - 1) + 4 * (m - 1) + 4;
}

/// Piece `id` of unit `unit`. Ids are laid out as
///   triangles   2*(i*(M-1)+j) + {0 lower-right, 1 upper-left}
///   strips      T + {right j, left (M-1)+j, top 2(M-1)+i, bottom 3(M-1)+i}
///   corners     T + 4(M-1) + {(-,-), (+,-), (-,+), (+,+)}
/// with T = 2(M-1)^2, matching pwlu_piece_id().
template <class S>
PwluPiece<S> pwlu_piece(const Pwlu2dLayer& layer, std::size_t unit,
                        std::size_t id) {
  const std::size_t n = layer.grid_m - 1;
  const Matrix& val = layer.values[unit];
  const S one(1), zero(0);
  const S h = S(2) / S(static_cast<long>(n));
  auto grid = [&](std::size_t i) { return S(-1) + S(static_cast<long>(i)) * h; };
  auto f = [&](std::size_t i, std::size_t j) {
    return S(val(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  };

  PwluPiece<S> p;
  const std::size_t t = 2 * n * n;
  if (id < t) {
    const std::size_t cell = id / 2;
    const std::size_t i = cell / n, j = cell % n;
    const S u0 = grid(i), v0 = grid(j);
    const S f00 = f(i, j), f10 = f(i + 1, j), f01 = f(i, j + 1),
            f11 = f(i + 1, j + 1);
    if (id % 2 == 0) {
      // lower-right: alpha >= beta, beta >= 0, alpha <= 1
      p.constraints = {{one, -one, v0 - u0}, {zero, one, -v0},
                       {-one, zero, u0 + h}};
      p.grad_u = (f10 - f00) / h;
      p.grad_v = (f11 - f10) / h;
    } else {
      // upper-left: alpha <= beta, alpha >= 0, beta <= 1
      p.constraints = {{-one, one, u0 - v0}, {one, zero, -u0},
                       {zero, -one, v0 + h}};
      p.grad_v = (f01 - f00) / h;
      p.grad_u = (f11 - f01) / h;
    }
    p.c = f00 - p.grad_u * u0 - p.grad_v * v0;
    return p;
  }
  std::size_t r = id - t;
  if (r < 2 * n) {
    const bool right = r < n;
    const std::size_t j = right ? r : r - n;
    const std::size_t edge = right ? n : 0;
    const S v0 = grid(j);
    p.constraints = {{right ? one : -one, zero, -one}, {zero, one, -v0},
                     {zero, -one, v0 + h}};
    p.grad_u = zero;
    p.grad_v = (f(edge, j + 1) - f(edge, j)) / h;
    p.c = f(edge, j) - p.grad_v * v0;
    return p;
  }
  r -= 2 * n;
  if (r < 2 * n) {
    const bool top = r < n;
    const std::size_t i = top ? r : r - n;
    const std::size_t edge = top ? n : 0;
    const S u0 = grid(i);
    p.constraints = {{zero, top ? one : -one, -one}, {one, zero, -u0},
                     {-one, zero, u0 + h}};
    p.grad_v = zero;
    p.grad_u = (f(i + 1, edge) - f(i, edge)) / h;
    p.c = f(i, edge) - p.grad_u * u0;
    return p;
  }
  r -= 2 * n;
  const bool hu = (r & 1) != 0, hv = (r & 2) != 0;
  // su*u >= 1 and sv*v >= 1
  p.constraints = {{hu ? one : -one, zero, -one}, {zero, hv ? one : -one, -one}};
  p.grad_u = zero;
  p.grad_v = zero;
  p.c = f(hu ? n : 0, hv ? n : 0);
  return p;
}

template <class S>
std::vector<PwluPiece<S>> pwlu_pieces(const Pwlu2dLayer& layer,
                                      std::size_t unit) {
  std::vector<PwluPiece<S>> out;
  const std::size_t count = pwlu_piece_count(layer.grid_m);
  out.reserve(count);
  for (std::size_t id = 0; id < count; ++id) {
    out.push_back(pwlu_piece<S>(layer, unit, id));
  }
  return out;
}

/// Id (see pwlu_pieces) of the piece active at (u, v) on the side of
/// (du, dv).
int pwlu_piece_id(std::size_t grid_m, double u, double v, double du,
                  double dv);

/// Affine map of `layer` on piece `choice`, in scalar type S.
template <class S>
AffineT<S> local_affine_t(const LayerSpec& layer, const PieceChoice& choice,
                          std::size_t in_dim) {
  const auto n_in = static_cast<Eigen::Index>(in_dim);
  if (const auto* a = std::get_if<AffineLayer>(&layer)) {
    return convert_affine<S>(a->map);
  }
  if (const auto* p = std::get_if<PointwiseLayer>(&layer)) {
    AffineT<S> r;
    r.matrix = MatT<S>::Zero(n_in, n_in);
    r.offset = VecT<S>::Zero(n_in);
    for (Eigen::Index k = 0; k < n_in; ++k) {
      const auto pieces = scalar_pieces<S>(p->units[static_cast<std::size_t>(k)]);
      const auto idx = static_cast<std::size_t>(choice[static_cast<std::size_t>(k)]);
      r.matrix(k, k) = pieces.slopes[idx];
      r.offset(k) = pieces.intercepts[idx];
    }
    return r;
  }
  if (const auto* mx = std::get_if<MaxoutLayer>(&layer)) {
    const auto units = static_cast<Eigen::Index>(mx->units.size());
    AffineT<S> r;
    r.matrix = MatT<S>::Zero(units, n_in);
    r.offset = VecT<S>::Zero(units);
    for (Eigen::Index k = 0; k < units; ++k) {
      const AffineMap& u = mx->units[static_cast<std::size_t>(k)];
      const auto row = static_cast<Eigen::Index>(choice[static_cast<std::size_t>(k)]);
      for (Eigen::Index c = 0; c < n_in; ++c) r.matrix(k, c) = S(u.matrix(row, c));
      r.offset(k) = S(u.offset(row));
    }
    return r;
  }
  if (std::holds_alternative<GroupSortLayer>(layer)) {
    AffineT<S> r;
    r.matrix = MatT<S>::Zero(n_in, n_in);
    r.offset = VecT<S>::Zero(n_in);
    for (Eigen::Index k = 0; k < n_in; ++k) {
      r.matrix(k, choice[static_cast<std::size_t>(k)]) = S(1);
    }
    return r;
  }
  const auto& pw = std::get<Pwlu2dLayer>(layer);
  const auto units = static_cast<Eigen::Index>(pw.values.size());
  AffineT<S> r;
  r.matrix = MatT<S>::Zero(units, n_in);
  r.offset = VecT<S>::Zero(units);
  for (Eigen::Index k = 0; k < units; ++k) {
    const auto piece = pwlu_piece<S>(pw, static_cast<std::size_t>(k),
                                     static_cast<std::size_t>(choice[static_cast<std::size_t>(k)]));
    const AffineMap& ri = pw.readin[static_cast<std::size_t>(k)];
    for (Eigen::Index c = 0; c < n_in; ++c) {
      r.matrix(k, c) = piece.grad_u * S(ri.matrix(0, c)) + piece.grad_v * S(ri.matrix(1, c));
    }
    r.offset(k) = piece.grad_u * S(ri.offset(0)) + piece.grad_v * S(ri.offset(1)) + piece.c;
  }
  return r;
}

}  // namespace cpwl
