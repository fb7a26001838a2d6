// SPDX-License-Identifier: Apache-2.0
//
// Small dense two-phase simplex solver using Bland's anti-cycling rule.
// Templated on the scalar so the same code runs in double and in exact
// rational arithmetic.

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace cpwl::lp {

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

enum class Status { optimal, infeasible, unbounded };

template <class S>
struct Result {
  Status status = Status::infeasible;
  S value{};
  Vec<S> x;
};

namespace detail {

template <class S>
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : t_(rows + 1, cols + 1) {
    t_.setZero();
  }
  S& at(std::size_t r, std::size_t c) {
    return t_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  const S& at(std::size_t r, std::size_t c) const {
    return t_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  std::size_t rows() const { return static_cast<std::size_t>(t_.rows()) - 1; }
  std::size_t cols() const { return static_cast<std::size_t>(t_.cols()) - 1; }
  std::size_t obj() const { return rows(); }
  std::size_t rhs() const { return cols(); }

  void pivot(std::size_t r, std::size_t c) {
    const S p = at(r, c);
    for (std::size_t j = 0; j <= cols(); ++j) at(r, j) /= p;
    for (std::size_t i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const S f = at(i, c);
      if (f == S(0)) continue;
      for (std::size_t j = 0; j <= cols(); ++j) {
        if (at(r, j) != S(0)) at(i, j) -= f * at(r, j);
      }
    }
  }

 private:
  Mat<S> t_;
};

// Runs simplex iterations on the objective row (entries are reduced costs;
// a column enters while its entry is < -eps). Columns with allowed[c] ==
// false never enter. Returns false when unbounded.
template <class S>
bool iterate(Tableau<S>& t, std::vector<std::size_t>& basis,
             const std::vector<bool>& allowed, const S& eps) {
  const std::size_t m = t.rows();
  for (;;) {
    std::size_t enter = t.cols();
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (allowed[c] && t.at(t.obj(), c) < -eps) {
        enter = c;
        break;
      }
    }
    if (enter == t.cols()) return true;
    std::size_t leave = m;
    S best{};
    for (std::size_t r = 0; r < m; ++r) {
      const S a = t.at(r, enter);
      if (!(a > eps)) continue;
      const S ratio = t.at(r, t.rhs()) / a;
      if (leave == m || ratio < best ||
          (ratio == best && basis[r] < basis[leave])) {
        leave = r;
        best = ratio;
      }
    }
    if (leave == m) return false;
    t.pivot(leave, enter);
    basis[leave] = enter;
  }
}

}  // namespace detail

/// maximize c.z subject to A z <= b, z >= 0.
/// `eps` is the pivoting tolerance (use 0 for exact scalars).
template <class S>
Result<S> maximize(const Mat<S>& A, const Vec<S>& b, const Vec<S>& c, const S& eps) {
  const auto m = static_cast<std::size_t>(A.rows());
  const auto n = static_cast<std::size_t>(A.cols());
  std::vector<std::size_t> art_rows;
  for (std::size_t i = 0; i < m; ++i) {
    if (b(static_cast<Eigen::Index>(i)) < S(0)) art_rows.push_back(i);
  }
  const std::size_t na = art_rows.size();
  const std::size_t cols = n + m + na;
  detail::Tableau<S> t(m, cols);
  std::vector<std::size_t> basis(m);
  std::size_t next_art = n + m;
  for (std::size_t i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const bool neg = b(ii) < S(0);
    const S sign = neg ? S(-1) : S(1);
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign * A(ii, static_cast<Eigen::Index>(j));
    t.at(i, n + i) = sign;
    t.at(i, t.rhs()) = sign * b(ii);
    if (neg) {
      t.at(i, next_art) = S(1);
      basis[i] = next_art++;
    } else {
      basis[i] = n + i;
    }
  }

  std::vector<bool> allowed(cols, true);
  if (na > 0) {
    // phase 1: maximize -sum(artificials)
    for (std::size_t j = n + m; j < cols; ++j) t.at(t.obj(), j) = S(1);
    for (std::size_t i : art_rows) {
      for (std::size_t j = 0; j <= cols; ++j) t.at(t.obj(), j) -= t.at(i, j);
    }
    detail::iterate(t, basis, allowed, eps);
    // objective row rhs holds -(-sum art) = sum of artificials at optimum
    if (-t.at(t.obj(), t.rhs()) > eps) return Result<S>{Status::infeasible, S(0), Vec<S>()};
    // drive remaining artificials out of the basis
    for (std::size_t r = 0; r < m; ++r) {
      if (basis[r] < n + m) continue;
      for (std::size_t j = 0; j < n + m; ++j) {
        const S a = t.at(r, j);
        if (a > eps || a < -eps) {
          t.pivot(r, j);
          basis[r] = j;
          break;
        }
      }
    }
    for (std::size_t j = n + m; j < cols; ++j) allowed[j] = false;
  }

  // phase 2
  for (std::size_t j = 0; j <= cols; ++j) t.at(t.obj(), j) = S(0);
  for (std::size_t j = 0; j < n; ++j) t.at(t.obj(), j) = -c(static_cast<Eigen::Index>(j));
  for (std::size_t r = 0; r < m; ++r) {
    const S f = t.at(t.obj(), basis[r]);
    if (f == S(0)) continue;
    for (std::size_t j = 0; j <= cols; ++j) t.at(t.obj(), j) -= f * t.at(r, j);
  }
  if (!detail::iterate(t, basis, allowed, eps)) {
    return Result<S>{Status::unbounded, S(0), Vec<S>()};
  }
  Result<S> res;
  res.status = Status::optimal;
  res.x = Vec<S>::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < m; ++r) {
    if (basis[r] < n) res.x(static_cast<Eigen::Index>(basis[r])) = t.at(r, t.rhs());
  }
  res.value = t.at(t.obj(), t.rhs());
  return res;
}

}  // namespace cpwl::lp
