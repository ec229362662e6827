#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pwflow/linalg.hpp"

// Payoff matrices, simplex geometry, set-valued best responses,
// transversality checks and Nash equilibrium solving.

namespace pwflow {

enum class Side { P, Q };

template <class T>
struct GameMatrix {
  Mat<T> m;

  GameMatrix() = default;
  explicit GameMatrix(Mat<T> mat) : m(std::move(mat)) {
    if (m.rows() < 2 || m.cols() < 2) throw DimensionError("GameMatrix: need m,n >= 2");
    if constexpr (!scalar_traits<T>::exact) {
      for (size_t i = 0; i < m.rows(); ++i)
        for (size_t j = 0; j < m.cols(); ++j)
          if (!std::isfinite(to_double(m(i, j)))) throw NumericError("GameMatrix: non-finite entry");
    }
  }
  size_t rows() const { return m.rows(); }
  size_t cols() const { return m.cols(); }
};

// The example matrix with the golden-mean parameter; its completely mixed
// equilibrium is the barycenter and det = 1 + beta^3.
template <class T>
GameMatrix<T> cyclic_matrix(const T& beta) {
  Mat<T> b(3, 3);
  b(0, 0) = T(1); b(0, 1) = T(0); b(0, 2) = beta;
  b(1, 0) = beta; b(1, 1) = T(1); b(1, 2) = T(0);
  b(2, 0) = T(0); b(2, 1) = beta; b(2, 2) = T(1);
  return GameMatrix<T>(b);
}

template <class T>
bool is_simplex_point(const Vec<T>& x, const T& tol) {
  for (const auto& c : x)
    if (c < -tol) return false;
  return scalar_traits<T>::abs(x.sum() - T(1)) <= tol;
}

// Support (0-based internally) of the maximizers of `scores` within a
// relative tie tolerance; exact comparison in rational mode.
template <class T>
std::vector<size_t> argmax_support(const Vec<T>& scores, bool minimize = false) {
  if (scores.size() == 0) throw DimensionError("argmax_support: empty scores");
  if constexpr (!scalar_traits<T>::exact) {
    for (const auto& s : scores)
      if (!std::isfinite(to_double(s))) throw NumericError("argmax_support: non-finite score");
  }
  T best = scores[0];
  for (const auto& s : scores) {
    if (minimize ? s < best : s > best) best = s;
  }
  T scale = std::max(T(1), scores.max_abs());
  T tol = scalar_traits<T>::tie_tol() * scale;
  std::vector<size_t> sup;
  for (size_t i = 0; i < scores.size(); ++i) {
    T gap = minimize ? scores[i] - best : best - scores[i];
    if (gap <= tol) sup.push_back(i);
  }
  return sup;
}

struct BestResponseSet {
  Side side;
  std::vector<size_t> support;  // 0-based, sorted
  bool single_valued() const { return support.size() == 1; }
};

// Side P maximizes the components of M q, side Q minimizes those of p'M.
template <class T>
BestResponseSet best_response(const GameMatrix<T>& g, const Vec<T>& x, Side side) {
  if (side == Side::P) {
    if (x.size() != g.cols()) throw DimensionError("best_response: q size");
    return {Side::P, argmax_support(g.m.mul(x), false)};
  }
  if (x.size() != g.rows()) throw DimensionError("best_response: p size");
  return {Side::Q, argmax_support(g.m.tmul(x), true)};
}

// H(p,q) = max_i (Mq)_i - min_j (p'M)_j, the duality gap; >= 0 with
// equality exactly at Nash equilibria.
template <class T>
T hamiltonian_value(const GameMatrix<T>& g, const Vec<T>& p, const Vec<T>& q) {
  if (p.size() != g.rows() || q.size() != g.cols())
    throw DimensionError("hamiltonian_value: shape");
  Vec<T> mq = g.m.mul(q);
  Vec<T> pm = g.m.tmul(p);
  T mx = mq[0], mn = pm[0];
  for (const auto& v : mq) mx = std::max(mx, v);
  for (const auto& v : pm) mn = std::min(mn, v);
  return mx - mn;
}

struct MinorWitness {
  std::vector<size_t> row_set, col_set;  // 0-based
  std::string variant;                   // "M", "row-diff i", "col-diff j"
};

struct TransversalityReport {
  bool assumption1_ok = true;
  bool assumption2_ok = true;
  std::vector<MinorWitness> failing_minors;
};

namespace detail {

template <class T>
bool minor_is_zero(const T& det) {
  if constexpr (scalar_traits<T>::exact) return det == T(0);
  else return scalar_traits<T>::abs(det) <= T(1e-12);
}

inline void enumerate_subsets(size_t n, size_t r, const std::function<void(const std::vector<size_t>&)>& f) {
  std::vector<size_t> idx(r);
  for (size_t i = 0; i < r; ++i) idx[i] = i;
  while (true) {
    f(idx);
    size_t k = r;
    while (k-- > 0) {
      if (idx[k] + (r - k) < n) {
        ++idx[k];
        for (size_t j = k + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
        break;
      }
      if (k == 0) return;
    }
  }
}

template <class T>
bool all_minors_nonzero(const Mat<T>& m, size_t r_min, const std::string& variant,
                        std::vector<MinorWitness>& witnesses) {
  bool ok = true;
  size_t rmax = std::min(m.rows(), m.cols());
  for (size_t r = r_min; r <= rmax; ++r) {
    enumerate_subsets(m.rows(), r, [&](const std::vector<size_t>& rows) {
      enumerate_subsets(m.cols(), r, [&](const std::vector<size_t>& cols) {
        if (minor_is_zero(determinant(m.submatrix(rows, cols)))) {
          ok = false;
          if (witnesses.size() < 64) witnesses.push_back({rows, cols, variant});
        }
      });
    });
  }
  return ok;
}

}  // namespace detail

// Assumption 1: every r x r minor of M non-zero, r >= 2.  Assumption 2:
// every minor (all sizes) of every row-differenced and column-differenced
// matrix non-zero.
template <class T>
TransversalityReport check_transversality(const GameMatrix<T>& g) {
  TransversalityReport rep;
  rep.assumption1_ok = detail::all_minors_nonzero(g.m, 2, "M", rep.failing_minors);
  for (size_t pivot = 0; pivot < g.rows() && rep.assumption2_ok; ++pivot) {
    Mat<T> diff(g.rows() - 1, g.cols());
    size_t out = 0;
    for (size_t i = 0; i < g.rows(); ++i) {
      if (i == pivot) continue;
      for (size_t j = 0; j < g.cols(); ++j) diff(out, j) = g.m(i, j) - g.m(pivot, j);
      ++out;
    }
    if (!detail::all_minors_nonzero(diff, 1, "row-diff " + std::to_string(pivot + 1), rep.failing_minors))
      rep.assumption2_ok = false;
  }
  for (size_t pivot = 0; pivot < g.cols() && rep.assumption2_ok; ++pivot) {
    Mat<T> diff(g.rows(), g.cols() - 1);
    size_t out = 0;
    for (size_t j = 0; j < g.cols(); ++j) {
      if (j == pivot) continue;
      for (size_t i = 0; i < g.rows(); ++i) diff(i, out) = g.m(i, j) - g.m(i, pivot);
      ++out;
    }
    if (!detail::all_minors_nonzero(diff, 1, "col-diff " + std::to_string(pivot + 1), rep.failing_minors))
      rep.assumption2_ok = false;
  }
  return rep;
}

template <class T>
struct NashEquilibrium {
  Vec<T> p_bar, q_bar;
  T lambda{}, mu{};  // p_bar'M = lambda on support_q; M q_bar = mu on support_p
  std::vector<size_t> support_p, support_q;  // 0-based
  bool completely_mixed = false;
  bool degenerate_multiple = false;
};

// Solves p'M = lambda 1', M q = mu 1 with 1'p = 1'q = 1; returns nothing
// when a component comes out non-positive.
template <class T>
std::optional<NashEquilibrium<T>> solve_completely_mixed(const GameMatrix<T>& g) {
  if (g.rows() != g.cols()) throw DimensionError("solve_completely_mixed: m != n");
  const size_t n = g.rows();
  Vec<T> x, y;
  if (!solve_linear(g.m.transposed(), ones<T>(n), x)) throw NumericError("singular matrix");
  if (!solve_linear(g.m, ones<T>(n), y)) throw NumericError("singular matrix");
  T sx = x.sum(), sy = y.sum();
  if (sx == T(0) || sy == T(0)) return std::nullopt;
  NashEquilibrium<T> eq;
  eq.p_bar = Vec<T>(n);
  eq.q_bar = Vec<T>(n);
  for (size_t i = 0; i < n; ++i) {
    eq.p_bar[i] = x[i] / sx;
    eq.q_bar[i] = y[i] / sy;
    if (eq.p_bar[i] <= T(0) || eq.q_bar[i] <= T(0)) return std::nullopt;
  }
  eq.lambda = T(1) / sx;
  eq.mu = T(1) / sy;
  for (size_t i = 0; i < n; ++i) {
    eq.support_p.push_back(i);
    eq.support_q.push_back(i);
  }
  eq.completely_mixed = true;
  return eq;
}

// Support enumeration over equal-size support pairs, largest first.  Intended
// scale is n <= 6; the enumeration is exponential beyond that.
template <class T>
NashEquilibrium<T> solve_nash(const GameMatrix<T>& g) {
  const size_t m = g.rows(), n = g.cols();
  T opt_tol = scalar_traits<T>::exact ? T(0) : T(1e-9) * std::max(T(1), g.m.max_abs());
  std::optional<NashEquilibrium<T>> found;
  bool multiple = false;

  // Shift all entries positive so every restricted game value is non-zero;
  // equilibria are invariant, lambda/mu shift back at the end.
  T shift = g.m.max_abs() + T(1);
  Mat<T> shifted = g.m;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) shifted(i, j) += shift;

  for (size_t r = std::min(m, n); r >= 1 && !found; --r) {
    detail::enumerate_subsets(m, r, [&](const std::vector<size_t>& rows) {
      detail::enumerate_subsets(n, r, [&](const std::vector<size_t>& cols) {
        Mat<T> sub = shifted.submatrix(rows, cols);
        Vec<T> x, y;
        if (!solve_linear(sub.transposed(), ones<T>(r), x)) return;
        if (!solve_linear(sub, ones<T>(r), y)) return;
        T sx = x.sum(), sy = y.sum();
        if (sx == T(0) || sy == T(0)) return;
        Vec<T> p(m), q(n);
        for (size_t i = 0; i < r; ++i) {
          p[rows[i]] = x[i] / sx;
          q[cols[i]] = y[i] / sy;
          if (p[rows[i]] <= T(0) || q[cols[i]] <= T(0)) return;
        }
        T lambda = T(1) / sx, mu = T(1) / sy;
        // Off-support optimality: rows must not beat mu, columns not
        // undercut lambda.
        Vec<T> mq = shifted.mul(q), pm = shifted.tmul(p);
        for (size_t i = 0; i < m; ++i)
          if (mq[i] > mu + opt_tol) return;
        for (size_t j = 0; j < n; ++j)
          if (pm[j] < lambda - opt_tol) return;
        if (found) {
          multiple = true;
          return;
        }
        NashEquilibrium<T> eq;
        eq.p_bar = p;
        eq.q_bar = q;
        eq.lambda = lambda - shift;
        eq.mu = mu - shift;
        eq.support_p = rows;
        eq.support_q = cols;
        eq.completely_mixed = (r == m && r == n);
        found = eq;
      });
    });
  }
  if (!found) throw NumericError("solve_nash: no equilibrium found (numerical failure)");
  found->degenerate_multiple = multiple;
  return *found;
}

}  // namespace pwflow
