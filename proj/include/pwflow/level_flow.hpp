#pragma once

#include "pwflow/flow.hpp"

// Flow induced on a level set of H after the substitution s = e^t: piecewise
// a translation flow with directions X BR_p + (alpha - 1) p_bar.  Events are
// roots of affine functions of s, so segments are exact straight lines; the
// conjugacy with the t-time flow is checked in tests, not used here.

namespace pwflow {

template <class T>
Vec<T> stack_state(const Vec<T>& p, const Vec<T>& q) {
  Vec<T> x(p.size() + q.size());
  for (size_t i = 0; i < p.size(); ++i) x[i] = p[i];
  for (size_t j = 0; j < q.size(); ++j) x[p.size() + j] = q[j];
  return x;
}

template <class T>
std::pair<Vec<T>, Vec<T>> unstack_state(const Vec<T>& x, size_t m) {
  Vec<T> p(m), q(x.size() - m);
  for (size_t i = 0; i < m; ++i) p[i] = x[i];
  for (size_t j = 0; j < q.size(); ++j) q[j] = x[m + j];
  return {p, q};
}

template <class T>
struct TranslationSegment {
  Vec<T> x_enter;   // stacked (p, q) at segment entry
  Vec<T> dir;       // stacked direction, constant on the segment
  size_t ip = 0, jq = 0;
  T s_enter{}, s_exit{};
  bool truncated = false;
};

// Hyperplane n . x = c in stacked coordinates.
template <class T>
struct Hyperplane {
  Vec<T> normal;
  T offset{};
  T eval(const Vec<T>& x) const { return normal.dot(x) - offset; }
};

// Indifference hyperplane between two rows (ties in Mq) or two columns
// (ties in p'M).
template <class T>
Hyperplane<T> tie_hyperplane(const DynamicsSpec<T>& spec, Side side, size_t a, size_t b) {
  const size_t m = spec.m(), n = spec.n();
  Hyperplane<T> h;
  h.normal = Vec<T>(m + n);
  h.offset = T(0);
  if (side == Side::P) {  // (Mq)_a = (Mq)_b
    for (size_t j = 0; j < n; ++j) h.normal[m + j] = spec.game.m(a, j) - spec.game.m(b, j);
  } else {  // (p'M)_a = (p'M)_b
    for (size_t i = 0; i < m; ++i) h.normal[i] = spec.game.m(i, a) - spec.game.m(i, b);
  }
  return h;
}

// Stacked direction of the level flow in the cell (ip, jq).
template <class T>
Vec<T> level_direction(const DynamicsSpec<T>& spec, size_t ip, size_t jq) {
  Vec<T> dp = spec.target_p.col(ip) - spec.eq.p_bar;
  Vec<T> dq = spec.target_q.col(jq) - spec.eq.q_bar;
  return stack_state(dp, dq);
}

template <class T>
using LevelObserver = std::function<bool(const TranslationSegment<T>&)>;

// Straight-line segments from s_start to s_end; each event is the smallest
// positive root of an affine switching function.  Sliding has no projected
// counterpart here and is reported as an error.
template <class T>
void level_flow(const Vec<T>& p0, const Vec<T>& q0, const DynamicsSpec<T>& spec, T s_start,
                T s_end, const LevelObserver<T>& observe, size_t segment_cap = 100000) {
  const size_t m = spec.m(), n = spec.n();
  Vec<T> p = p0, q = q0;
  T s = s_start;
  for (size_t count = 0; s < s_end; ++count) {
    if (count >= segment_cap) throw NumericError("level_flow: segment cap exceeded");
    FlowState<T> fs{p, q, 0.0};
    Continuation<T> cont = resolve_event(fs, spec);
    if (cont.mode == SegmentMode::Sliding)
      throw NumericError("level_flow: sliding set reached (no projected counterpart)");
    const size_t ip = cont.ip, jq = cont.jq;
    Vec<T> dp = spec.target_p.col(ip) - spec.eq.p_bar;
    Vec<T> dq = spec.target_q.col(jq) - spec.eq.q_bar;

    Vec<T> mq = spec.game.m.mul(q), pm = spec.game.m.tmul(p);
    Vec<T> mdq = spec.game.m.mul(dq), dpm = spec.game.m.tmul(dp);

    // Switching functions g(ds) = gap + ds * slope; first root with slope < 0.
    bool have = false;
    T ds_min(0);
    auto consider = [&](const T& gap, const T& slope) {
      if (slope >= T(0)) return;
      if (gap <= T(0)) return;  // structural tie at entry, not an exit
      T ds = -gap / slope;
      if (!have || ds < ds_min) {
        ds_min = ds;
        have = true;
      }
    };
    for (size_t i = 0; i < m; ++i)
      if (i != ip) consider(mq[ip] - mq[i], mdq[ip] - mdq[i]);
    for (size_t j = 0; j < n; ++j)
      if (j != jq) consider(pm[j] - pm[jq], dpm[j] - dpm[jq]);

    TranslationSegment<T> seg;
    seg.x_enter = stack_state(p, q);
    seg.dir = stack_state(dp, dq);
    seg.ip = ip;
    seg.jq = jq;
    seg.s_enter = s;
    T ds;
    if (!have || s + ds_min > s_end) {
      ds = s_end - s;
      seg.truncated = true;
    } else {
      ds = ds_min;
    }
    seg.s_exit = s + ds;
    for (size_t i = 0; i < m; ++i) p[i] += ds * dp[i];
    for (size_t j = 0; j < n; ++j) q[j] += ds * dq[j];
    s = seg.s_exit;
    if (!observe(seg)) return;
    if (seg.truncated) return;
  }
}

template <class T>
std::vector<TranslationSegment<T>> level_flow_segments(const Vec<T>& p0, const Vec<T>& q0,
                                                       const DynamicsSpec<T>& spec, T s_start,
                                                       T s_end, size_t segment_cap = 100000) {
  std::vector<TranslationSegment<T>> out;
  level_flow<T>(p0, q0, spec, s_start, s_end,
                [&](const TranslationSegment<T>& seg) {
                  out.push_back(seg);
                  return true;
                },
                segment_cap);
  return out;
}

template <class T>
struct ReturnResult {
  bool found = false;
  Vec<T> point;  // stacked
  T return_s{};
  std::vector<std::pair<size_t, size_t>> itinerary;  // cells traversed
};

// Next transversal intersection with the hyperplane in forward s-time.
// Crossings before s_min are skipped so a start on the section departs first.
template <class T>
ReturnResult<T> first_return(const Hyperplane<T>& section, const Vec<T>& p0, const Vec<T>& q0,
                             const DynamicsSpec<T>& spec, T s_cap,
                             const T& s_min = T(1) / T(1000000000)) {
  ReturnResult<T> res;
  level_flow<T>(p0, q0, spec, T(0), s_cap, [&](const TranslationSegment<T>& seg) {
    res.itinerary.emplace_back(seg.ip, seg.jq);
    T g0 = section.eval(seg.x_enter);
    T gd = section.normal.dot(seg.dir);
    if (gd != T(0)) {
      T ds = -g0 / gd;
      T s_hit = seg.s_enter + ds;
      if (ds >= T(0) && s_hit <= seg.s_exit && s_hit > s_min) {
        res.found = true;
        res.return_s = s_hit;
        res.point = seg.x_enter;
        for (size_t k = 0; k < res.point.size(); ++k) res.point[k] += ds * seg.dir[k];
        return false;
      }
    }
    return true;
  });
  return res;
}

// One itinerary's worth of composed crossing maps: x -> matrix x + offset in
// stacked coordinates, flowing from section_in to section_out through the
// listed cells.
template <class T>
struct AffinePiece {
  Mat<T> matrix;
  Vec<T> offset;
  std::vector<std::pair<size_t, size_t>> itinerary;
  Hyperplane<T> section_in, section_out;

  Vec<T> eval(const Vec<T>& x) const { return matrix.mul(x) + offset; }
};

namespace detail {

// Crossing map of a translation with direction v onto plane (n, c):
// x -> x + s(x) v with s(x) = (c - n.x)/(n.v).
template <class T>
void append_leg(Mat<T>& c_mat, Vec<T>& c_off, const Vec<T>& v, const Hyperplane<T>& plane) {
  T nv = plane.normal.dot(v);
  if (nv == T(0)) throw NumericError("affine_piece: flow parallel to a section plane");
  if constexpr (!scalar_traits<T>::exact) {
    if (scalar_traits<T>::abs(nv) < T(1e-12) * std::max(T(1), v.max_abs()))
      throw NumericError("affine_piece: near-tangent section crossing");
  }
  const size_t d = v.size();
  Mat<T> leg = Mat<T>::identity(d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) leg(i, j) -= v[i] * plane.normal[j] / nv;
  Vec<T> leg_off(d);
  for (size_t i = 0; i < d; ++i) leg_off[i] = plane.offset / nv * v[i];
  c_off = leg.mul(c_off) + leg_off;
  c_mat = leg.mul(c_mat);
}

// Switching plane between consecutive itinerary cells; exactly one side of
// the support pair must change per step.
template <class T>
Hyperplane<T> between_cells(const DynamicsSpec<T>& spec, std::pair<size_t, size_t> from,
                            std::pair<size_t, size_t> to) {
  bool p_change = from.first != to.first;
  bool q_change = from.second != to.second;
  if (p_change == q_change)
    throw NumericError("affine_piece: itinerary step must change exactly one support index");
  if (p_change) return tie_hyperplane(spec, Side::P, from.first, to.first);
  return tie_hyperplane(spec, Side::Q, from.second, to.second);
}

}  // namespace detail

template <class T>
AffinePiece<T> affine_piece(const std::vector<std::pair<size_t, size_t>>& itinerary,
                            const Hyperplane<T>& section_in, const Hyperplane<T>& section_out,
                            const DynamicsSpec<T>& spec) {
  if (itinerary.empty()) throw NumericError("affine_piece: empty itinerary");
  const size_t d = spec.m() + spec.n();
  AffinePiece<T> piece;
  piece.itinerary = itinerary;
  piece.section_in = section_in;
  piece.section_out = section_out;
  piece.matrix = Mat<T>::identity(d);
  piece.offset = Vec<T>(d);
  for (size_t k = 0; k < itinerary.size(); ++k) {
    Vec<T> v = level_direction(spec, itinerary[k].first, itinerary[k].second);
    Hyperplane<T> exit_plane = (k + 1 < itinerary.size())
                                   ? detail::between_cells(spec, itinerary[k], itinerary[k + 1])
                                   : section_out;
    detail::append_leg(piece.matrix, piece.offset, v, exit_plane);
  }
  return piece;
}

template <class T>
struct PeriodicOrbit {
  std::vector<std::pair<size_t, size_t>> itinerary;
  Vec<T> base_p, base_q;
  T rho{};
  T period_s{};
  std::vector<Vec<T>> vertices;  // stacked points, one per itinerary crossing
  bool all_transversal = false;
  T closure_residual{};
};

namespace detail {

// Null-space basis of a small underdetermined system G x = h, plus one
// particular solution.  Row-echelon with column pivoting; exact in rational.
template <class T>
bool affine_subspace(Mat<T> g, Vec<T> h, Vec<T>& x0, std::vector<Vec<T>>& basis) {
  const size_t rows = g.rows(), cols = g.cols();
  std::vector<size_t> pivot_col;
  size_t r = 0;
  for (size_t c = 0; c < cols && r < rows; ++c) {
    size_t piv = r;
    T best = scalar_traits<T>::abs(g(r, c));
    for (size_t i = r + 1; i < rows; ++i) {
      T cand = scalar_traits<T>::abs(g(i, c));
      if (cand > best) { best = cand; piv = i; }
    }
    T thresh = scalar_traits<T>::exact ? T(0) : T(1e-12) * std::max(T(1), g.max_abs());
    if (best <= thresh) continue;
    if (piv != r) {
      for (size_t j = 0; j < cols; ++j) std::swap(g(r, j), g(piv, j));
      std::swap(h[r], h[piv]);
    }
    for (size_t i = 0; i < rows; ++i) {
      if (i == r || g(i, c) == T(0)) continue;
      T f = g(i, c) / g(r, c);
      for (size_t j = 0; j < cols; ++j) g(i, j) -= f * g(r, j);
      h[i] -= f * h[r];
    }
    pivot_col.push_back(c);
    ++r;
  }
  for (size_t i = r; i < rows; ++i) {
    T thresh = scalar_traits<T>::exact ? T(0) : T(1e-9);
    if (scalar_traits<T>::abs(h[i]) > thresh) return false;  // inconsistent
  }
  std::vector<bool> is_pivot(cols, false);
  for (size_t k = 0; k < pivot_col.size(); ++k) is_pivot[pivot_col[k]] = true;
  x0 = Vec<T>(cols);
  for (size_t k = 0; k < pivot_col.size(); ++k) x0[pivot_col[k]] = h[k] / g(k, pivot_col[k]);
  basis.clear();
  for (size_t c = 0; c < cols; ++c) {
    if (is_pivot[c]) continue;
    Vec<T> v(cols);
    v[c] = T(1);
    for (size_t k = 0; k < pivot_col.size(); ++k)
      v[pivot_col[k]] = -g(k, c) / g(k, pivot_col[k]);
    basis.push_back(v);
  }
  return true;
}

}  // namespace detail

// Fixed point of the cyclic composed affine piece restricted to the affine
// subspace cut out by the simplex sums, the entry section plane and the
// level constraint of the first cell.  The solution is then re-flowed to
// validate the itinerary, transversality and closure.
template <class T>
std::optional<PeriodicOrbit<T>> periodic_orbit_solve(
    const std::vector<std::pair<size_t, size_t>>& itinerary, const DynamicsSpec<T>& spec,
    const T& rho) {
  if (itinerary.size() < 2) return std::nullopt;
  const size_t m = spec.m(), n = spec.n(), d = m + n;
  Hyperplane<T> entry = detail::between_cells(spec, itinerary.back(), itinerary.front());
  AffinePiece<T> piece = affine_piece(itinerary, entry, entry, spec);

  // Constraint rows: 1'p = 1, 1'q = 1, entry plane, level value in cell 0.
  Mat<T> g(4, d);
  Vec<T> h(4);
  for (size_t i = 0; i < m; ++i) g(0, i) = T(1);
  for (size_t j = 0; j < n; ++j) g(1, m + j) = T(1);
  h[0] = T(1);
  h[1] = T(1);
  for (size_t c = 0; c < d; ++c) g(2, c) = entry.normal[c];
  h[2] = entry.offset;
  const size_t ip0 = itinerary.front().first, jq0 = itinerary.front().second;
  for (size_t j = 0; j < n; ++j) g(3, m + j) = spec.game.m(ip0, j);
  for (size_t i = 0; i < m; ++i) g(3, i) = -spec.game.m(i, jq0);
  h[3] = rho;

  Vec<T> x0;
  std::vector<Vec<T>> basis;
  if (!detail::affine_subspace(g, h, x0, basis)) return std::nullopt;
  const size_t k = basis.size();

  // (I - C)(x0 + E u) = off  solved in the subspace via normal equations.
  Vec<T> rhs = piece.eval(x0) - x0;  // = C x0 + off - x0
  std::vector<Vec<T>> cols(k);
  for (size_t c = 0; c < k; ++c) cols[c] = basis[c] - piece.matrix.mul(basis[c]);
  Mat<T> normal(k, k);
  Vec<T> nrhs(k);
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = 0; b < k; ++b) normal(a, b) = cols[a].dot(cols[b]);
    nrhs[a] = cols[a].dot(rhs);
  }
  Vec<T> u;
  if (!solve_linear(normal, nrhs, u)) return std::nullopt;  // parabolic piece
  Vec<T> x_star = x0;
  for (size_t c = 0; c < k; ++c) x_star += u[c] * basis[c];
  if constexpr (!scalar_traits<T>::exact) {
    for (const auto& c : x_star)
      if (!std::isfinite(to_double(c))) return std::nullopt;
  }
  // Consistency of the least-squares solve (rhs realizable in the subspace).
  Vec<T> fp_res = piece.eval(x_star) - x_star;
  T fp_tol = scalar_traits<T>::exact ? T(0) : T(1e-9);
  if (fp_res.max_abs() > fp_tol) return std::nullopt;

  // Re-flow the solution through one cycle and check it realizes the cells.
  PeriodicOrbit<T> orbit;
  orbit.itinerary = itinerary;
  orbit.rho = rho;
  auto [p, q] = unstack_state(x_star, m);
  orbit.base_p = p;
  orbit.base_q = q;
  orbit.all_transversal = true;
  Vec<T> x = x_star;
  T period(0);
  for (size_t leg = 0; leg < itinerary.size(); ++leg) {
    auto [pl, ql] = unstack_state(x, m);
    FlowState<T> fs{pl, ql, 0.0};
    Continuation<T> cont = resolve_event(fs, spec);
    if (cont.mode != SegmentMode::Transversal || cont.ambiguous) orbit.all_transversal = false;
    if (cont.ip != itinerary[leg].first || cont.jq != itinerary[leg].second)
      return std::nullopt;  // solution does not realize the itinerary
    Vec<T> v = level_direction(spec, itinerary[leg].first, itinerary[leg].second);
    Hyperplane<T> exit_plane = (leg + 1 < itinerary.size())
                                   ? detail::between_cells(spec, itinerary[leg], itinerary[leg + 1])
                                   : entry;
    T nv = exit_plane.normal.dot(v);
    if (nv == T(0)) return std::nullopt;
    T ds = -exit_plane.eval(x) / nv;
    if (ds <= T(0)) return std::nullopt;
    orbit.vertices.push_back(x);
    for (size_t c = 0; c < d; ++c) x[c] += ds * v[c];
    period += ds;
  }
  orbit.period_s = period;
  orbit.closure_residual = (x - x_star).max_abs();
  T close_tol = scalar_traits<T>::exact ? T(0) : T(1e-9);
  if (orbit.closure_residual > close_tol) return std::nullopt;
  return orbit;
}

// Shortest cyclic pattern in the tail of an observed cell sequence; seeds
// the periodic-orbit search.
inline std::optional<std::vector<std::pair<size_t, size_t>>> detect_cycle(
    const std::vector<std::pair<size_t, size_t>>& cells, size_t max_len = 12) {
  if (cells.size() < 4) return std::nullopt;
  for (size_t len = 2; len <= max_len && 2 * len <= cells.size(); ++len) {
    bool ok = true;
    for (size_t k = 0; k < len && ok; ++k)
      ok = cells[cells.size() - 1 - k] == cells[cells.size() - 1 - k - len];
    if (ok) {
      std::vector<std::pair<size_t, size_t>> cyc(cells.end() - len, cells.end());
      return cyc;
    }
  }
  return std::nullopt;
}

}  // namespace pwflow
