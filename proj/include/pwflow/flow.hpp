#pragma once

#include <functional>
#include <optional>

#include "pwflow/geometry.hpp"

// Event-driven integration of the generalized best-response inclusion
//   dp/dt in X BR_p(q) + alpha p_bar - p,   dq/dt in Y BR_q(p) + alpha q_bar - q
// in original time t.  Between events the orbit is a closed-form exponential
// toward the current targets; event times come from switching functions of
// the form c e^{-t} + d, solved exactly in w = e^{-tau}.

namespace pwflow {

enum class DynamicsKind { BestResponse, Hamiltonian };

template <class T>
struct DynamicsSpec {
  GameMatrix<T> game;
  Mat<T> x, y;  // m x m and n x n
  T alpha{};
  NashEquilibrium<T> eq;
  DynamicsKind kind = DynamicsKind::BestResponse;

  // Cached per-vertex targets and their payoff images.
  Mat<T> target_p;  // column i: X e_i + alpha p_bar
  Mat<T> target_q;  // column j: Y e_j + alpha q_bar
  Mat<T> m_target_q;   // column j: M target_q(j)
  Mat<T> target_p_m;   // column i: M' target_p(i)  (i.e. target_p(i)' M)

  size_t m() const { return game.rows(); }
  size_t n() const { return game.cols(); }
};

struct SpecValidationError : NumericError {
  using NumericError::NumericError;
};

namespace detail {

template <class T>
void finish_spec(DynamicsSpec<T>& spec) {
  const size_t m = spec.m(), n = spec.n();
  spec.target_p = Mat<T>(m, m);
  spec.target_q = Mat<T>(n, n);
  for (size_t i = 0; i < m; ++i) {
    Vec<T> t = spec.x.col(i);
    for (size_t r = 0; r < m; ++r) spec.target_p(r, i) = t[r] + spec.alpha * spec.eq.p_bar[r];
  }
  for (size_t j = 0; j < n; ++j) {
    Vec<T> t = spec.y.col(j);
    for (size_t r = 0; r < n; ++r) spec.target_q(r, j) = t[r] + spec.alpha * spec.eq.q_bar[r];
  }
  spec.m_target_q = spec.game.m.mul(spec.target_q);
  spec.target_p_m = spec.game.m.transposed().mul(spec.target_p);
}

template <class T>
void validate_spec(const DynamicsSpec<T>& spec) {
  const T tol = scalar_traits<T>::exact ? T(0) : T(1e-12) * std::max(T(1), spec.game.m.max_abs());
  Mat<T> lhs = spec.game.m.mul(spec.y);
  Mat<T> rhs = spec.x.transposed().mul(spec.game.m);
  if ((lhs - rhs).max_abs() > tol)
    throw SpecValidationError("DynamicsSpec: M Y = X'M violated");
  // Targets of every vertex must stay in the affine hull of the simplex.
  for (size_t i = 0; i < spec.m(); ++i) {
    T s = spec.target_p.col(i).sum();
    if (scalar_traits<T>::abs(s - T(1)) > tol + T(scalar_traits<T>::exact ? 0 : 1e-12))
      throw SpecValidationError("DynamicsSpec: X e_i + alpha p_bar leaves the affine hull");
  }
  for (size_t j = 0; j < spec.n(); ++j) {
    T s = spec.target_q.col(j).sum();
    if (scalar_traits<T>::abs(s - T(1)) > tol + T(scalar_traits<T>::exact ? 0 : 1e-12))
      throw SpecValidationError("DynamicsSpec: Y e_j + alpha q_bar leaves the affine hull");
  }
  // Consequence of the constraints for regular games: X p_bar = (1-alpha) p_bar
  // and Y q_bar = (1-alpha) q_bar.  Checked only when the minor condition holds,
  // since degenerate games may admit other equilibria.
  Vec<T> xp = spec.x.mul(spec.eq.p_bar) - (T(1) - spec.alpha) * spec.eq.p_bar;
  Vec<T> yq = spec.y.mul(spec.eq.q_bar) - (T(1) - spec.alpha) * spec.eq.q_bar;
  T ctol = scalar_traits<T>::exact ? T(0) : T(1e-9);
  if (xp.max_abs() > ctol || yq.max_abs() > ctol) {
    if (check_transversality(spec.game).assumption1_ok)
      throw SpecValidationError("DynamicsSpec: X p_bar = (1-alpha) p_bar violated");
  }
}

}  // namespace detail

template <class T>
DynamicsSpec<T> make_spec(const GameMatrix<T>& g, DynamicsKind kind,
                          std::optional<SymplecticForm<T>> form = std::nullopt) {
  DynamicsSpec<T> spec;
  spec.game = g;
  spec.kind = kind;
  spec.eq = solve_nash(g);
  if (kind == DynamicsKind::BestResponse) {
    spec.x = Mat<T>::identity(g.rows());
    spec.y = Mat<T>::identity(g.cols());
    spec.alpha = T(0);
  } else {
    if (g.rows() != g.cols()) throw DimensionError("make_spec: hamiltonian kind needs m = n");
    if (!form) form = SymplecticForm<T>{g.m};  // A = M by default
    auto pp = build_projections(*form);
    spec.x = pp.p_p.mul(pp.a_inv.transposed()).mul(g.m.transposed());
    spec.y = pp.p_q.mul(pp.a_inv).mul(g.m);
    spec.alpha = T(1);
  }
  detail::finish_spec(spec);
  detail::validate_spec(spec);
  return spec;
}

// For custom (X, Y, alpha) triples; validation reports which constraint fails.
template <class T>
DynamicsSpec<T> make_custom_spec(const GameMatrix<T>& g, Mat<T> x, Mat<T> y, T alpha) {
  DynamicsSpec<T> spec;
  spec.game = g;
  spec.kind = DynamicsKind::BestResponse;
  spec.eq = solve_nash(g);
  spec.x = std::move(x);
  spec.y = std::move(y);
  spec.alpha = alpha;
  detail::finish_spec(spec);
  detail::validate_spec(spec);
  return spec;
}

template <class T>
struct FlowState {
  Vec<T> p, q;
  double t = 0.0;
};

enum class SegmentMode { Transversal, Sliding };

template <class T>
struct SegmentRecord {
  std::vector<size_t> support_p, support_q;  // 0-based best-response supports
  Vec<T> target_p, target_q;
  double t_enter = 0, t_exit = 0;
  SegmentMode mode = SegmentMode::Transversal;
  bool truncated = false;  // hit t_end instead of an event
};

template <class T>
struct SlidingFrame {
  Vec<T> a, b;  // subgame equilibrium targets
  std::vector<size_t> support_p, support_q;  // equal cardinality k
  std::vector<Vec<T>> tilde_basis_p, tilde_basis_q;  // directions of Z_p, Z_q
};

// Continuation decision after an event.
template <class T>
struct Continuation {
  SegmentMode mode = SegmentMode::Transversal;
  size_t ip = 0, jq = 0;  // transversal successor supports
  std::optional<SlidingFrame<T>> frame;
  bool ambiguous = false;
  std::vector<std::pair<size_t, size_t>> witnesses;  // all consistent candidates
};

struct FlowOptions {
  double t_max = 50.0;
  size_t segment_cap = 1000000;
};

namespace detail {

// Null-space basis of the linear part of Z_p(cols)/Z_q(rows) inside the
// tangent space of the simplex; used only to populate SlidingFrame.
template <class T>
std::vector<Vec<T>> indifference_tangent_basis(const Mat<T>& m, const std::vector<size_t>& tied,
                                               bool p_side) {
  // Constraints on v (dimension d): sum v = 0 and payoff-difference rows.
  size_t d = p_side ? m.rows() : m.cols();
  std::vector<Vec<T>> cons;
  cons.push_back(ones<T>(d));
  for (size_t k = 1; k < tied.size(); ++k) {
    Vec<T> c(d);
    for (size_t r = 0; r < d; ++r)
      c[r] = p_side ? m(r, tied[k]) - m(r, tied[0]) : m(tied[k], r) - m(tied[0], r);
    cons.push_back(c);
  }
  // Gram-Schmidt complement of the span of `cons` (double-precision quality
  // suffices; the basis only feeds diagnostics and tests).
  std::vector<Vec<T>> basis;
  for (size_t cand = 0; cand < d; ++cand) {
    Vec<T> v = unit<T>(d, cand);
    auto reject = [&](const Vec<T>& u) {
      T nn = u.dot(u);
      if (nn == T(0)) return;
      v -= (v.dot(u) / nn) * u;
    };
    for (auto& c : cons) reject(c);
    for (auto& bvec : basis) reject(bvec);
    if (to_double(v.dot(v)) > 1e-18) basis.push_back(v);
  }
  return basis;
}

}  // namespace detail

// Unique intersection (a, b) of the indifference product with the target
// simplex product; the sliding motion contracts toward it.
template <class T>
SlidingFrame<T> sliding_target(const DynamicsSpec<T>& spec, const std::vector<size_t>& support_p,
                               const std::vector<size_t>& support_q) {
  const size_t k = support_p.size();
  if (k != support_q.size())
    throw NumericError("sliding_target: support cardinalities differ");

  // a = sum theta_i target_p(i), theta in the k-simplex, with the columns of
  // support_q indifferent at a.  (k-1) equality constraints plus sum = 1.
  auto solve_side = [&](const std::vector<size_t>& own, const std::vector<size_t>& other,
                        const Mat<T>& targets, bool p_side) {
    Mat<T> sys(k, k);
    Vec<T> rhs(k);
    for (size_t c = 0; c < k; ++c) sys(0, c) = T(1);
    rhs[0] = T(1);
    for (size_t r = 1; r < k; ++r) {
      for (size_t c = 0; c < k; ++c) {
        Vec<T> tgt = targets.col(own[c]);
        T d0(0), dr(0);
        for (size_t l = 0; l < tgt.size(); ++l) {
          if (p_side) {
            d0 += tgt[l] * spec.game.m(l, other[0]);
            dr += tgt[l] * spec.game.m(l, other[r]);
          } else {
            d0 += spec.game.m(other[0], l) * tgt[l];
            dr += spec.game.m(other[r], l) * tgt[l];
          }
        }
        sys(r, c) = dr - d0;
      }
      rhs[r] = T(0);
    }
    Vec<T> theta;
    if (!solve_linear(sys, rhs, theta))
      throw NumericError("sliding_target: rank deficiency (general-position assumption fails)");
    for (const auto& w : theta)
      if (w <= T(0))
        throw NumericError("sliding_target: empty intersection (orbit leaves the indifference set)");
    Vec<T> point(targets.rows());
    for (size_t c = 0; c < k; ++c) point += theta[c] * targets.col(own[c]);
    return point;
  };

  SlidingFrame<T> frame;
  frame.support_p = support_p;
  frame.support_q = support_q;
  frame.a = solve_side(support_p, support_q, spec.target_p, true);
  frame.b = solve_side(support_q, support_p, spec.target_q, false);
  frame.tilde_basis_p = detail::indifference_tangent_basis(spec.game.m, support_q, true);
  frame.tilde_basis_q = detail::indifference_tangent_basis(spec.game.m, support_p, false);
  return frame;
}

// Enumerates successor supports at an event.  A transversal candidate (i, j)
// is consistent when, under its targets, every tied switching function moves
// strictly into the candidate's cell at t = 0+.
template <class T>
Continuation<T> resolve_event(const FlowState<T>& state, const DynamicsSpec<T>& spec) {
  Vec<T> mq = spec.game.m.mul(state.q);
  Vec<T> pm = spec.game.m.tmul(state.p);
  std::vector<size_t> kp = argmax_support(mq, false);
  std::vector<size_t> kq = argmax_support(pm, true);

  Continuation<T> cont;
  if (kp.size() == 1 && kq.size() == 1) {
    cont.ip = kp[0];
    cont.jq = kq[0];
    return cont;
  }

  T scale = std::max(T(1), spec.game.m.max_abs());
  T strict = scalar_traits<T>::tie_tol() * scale;
  for (size_t i : kp) {
    for (size_t j : kq) {
      bool ok = true;
      for (size_t i2 : kp) {
        if (i2 == i) continue;
        if (spec.m_target_q(i, j) - spec.m_target_q(i2, j) <= strict) { ok = false; break; }
      }
      if (ok)
        for (size_t j2 : kq) {
          if (j2 == j) continue;
          if (spec.target_p_m(j2, i) - spec.target_p_m(j, i) <= strict) { ok = false; break; }
        }
      if (ok) cont.witnesses.emplace_back(i, j);
    }
  }

  if (cont.witnesses.size() == 1) {
    cont.ip = cont.witnesses[0].first;
    cont.jq = cont.witnesses[0].second;
    return cont;
  }
  if (cont.witnesses.size() > 1) {
    // Non-generic tie: deterministic lowest-index preference, flagged.
    cont.ambiguous = true;
    cont.ip = cont.witnesses[0].first;
    cont.jq = cont.witnesses[0].second;
    return cont;
  }
  if (kp.size() == kq.size()) {
    cont.mode = SegmentMode::Sliding;
    cont.frame = sliding_target(spec, kp, kq);
    return cont;
  }
  throw NumericError(
      "resolve_event: no consistent continuation with unequal tie cardinalities "
      "(transversality assumption fails for this spec)");
}

// One maximal constant-target piece: closed-form exponential interpolation
// toward the targets until the earliest switching-function root.
template <class T>
std::pair<SegmentRecord<T>, FlowState<T>> advance_segment(const FlowState<T>& state,
                                                          const DynamicsSpec<T>& spec,
                                                          const Continuation<T>& cont,
                                                          double t_end) {
  const size_t m = spec.m(), n = spec.n();
  SegmentRecord<T> seg;
  seg.mode = cont.mode;
  seg.t_enter = state.t;

  Vec<T> tp, tq;
  std::vector<size_t> active_p, active_q;  // indices whose ties are structural
  if (cont.mode == SegmentMode::Transversal) {
    tp = spec.target_p.col(cont.ip);
    tq = spec.target_q.col(cont.jq);
    seg.support_p = {cont.ip};
    seg.support_q = {cont.jq};
    active_p = {cont.ip};
    active_q = {cont.jq};
  } else {
    tp = cont.frame->a;
    tq = cont.frame->b;
    seg.support_p = cont.frame->support_p;
    seg.support_q = cont.frame->support_q;
    active_p = cont.frame->support_p;
    active_q = cont.frame->support_q;
  }
  seg.target_p = tp;
  seg.target_q = tq;

  Vec<T> mq = spec.game.m.mul(state.q), pm = spec.game.m.tmul(state.p);
  Vec<T> mtq = spec.game.m.mul(tq), tpm = spec.game.m.tmul(tp);

  // Row/column switching functions in w = e^{-tau}: f(w) = a w + b with
  // a = current gap, b = target gap; a root in (0, 1) needs b < 0 < a.
  T w_event(-1);
  bool have_event = false;
  auto consider = [&](const T& gap_now, const T& gap_target) {
    if (gap_target >= T(0)) return;
    if (gap_now <= T(0)) return;  // structural tie or inconsistent start
    T w = -gap_target / (gap_now - gap_target);
    if (w <= T(0) || w >= T(1)) return;
    if (!have_event || w > w_event) {
      w_event = w;
      have_event = true;
    }
  };

  const size_t ip0 = active_p.front(), jq0 = active_q.front();
  auto is_active_p = [&](size_t i) {
    return std::find(active_p.begin(), active_p.end(), i) != active_p.end();
  };
  auto is_active_q = [&](size_t j) {
    return std::find(active_q.begin(), active_q.end(), j) != active_q.end();
  };
  for (size_t i = 0; i < m; ++i) {
    if (is_active_p(i)) continue;
    consider(mq[ip0] - mq[i], mtq[ip0] - mtq[i]);
  }
  for (size_t j = 0; j < n; ++j) {
    if (is_active_q(j)) continue;
    consider(pm[j] - pm[jq0], tpm[j] - tpm[jq0]);
  }

  double w_end = std::exp(-(t_end - state.t));
  T w;
  if (!have_event || to_double(w_event) < w_end) {
    seg.truncated = true;
    w = T(w_end);
  } else {
    w = w_event;
  }
  double tau = -std::log(to_double(w));
  if (!(tau > 0) && !seg.truncated)
    throw NumericError("advance_segment: non-positive event time (internal inconsistency)");

  FlowState<T> next;
  next.p = Vec<T>(m);
  next.q = Vec<T>(n);
  for (size_t i = 0; i < m; ++i) next.p[i] = w * state.p[i] + (T(1) - w) * tp[i];
  for (size_t j = 0; j < n; ++j) next.q[j] = w * state.q[j] + (T(1) - w) * tq[j];
  next.t = seg.truncated ? t_end : state.t + tau;
  seg.t_exit = next.t;
  return {seg, next};
}

template <class T>
using SegmentObserver = std::function<bool(const SegmentRecord<T>&, const FlowState<T>&)>;

// Concatenates segments over [state.t, t_end]; the observer sees each segment
// with the state at its exit and may stop the run by returning false.
template <class T>
FlowState<T> flow(FlowState<T> state, const DynamicsSpec<T>& spec, double t_end,
                  const SegmentObserver<T>& observe, const FlowOptions& opt = {}) {
  if ((state.p - spec.eq.p_bar).max_abs() == T(0) && (state.q - spec.eq.q_bar).max_abs() == T(0))
    throw NumericError("flow: undefined at the Nash equilibrium");
  double horizon = std::min(t_end, state.t + opt.t_max);
  for (size_t count = 0; count < opt.segment_cap; ++count) {
    Continuation<T> cont = resolve_event(state, spec);
    auto [seg, next] = advance_segment(state, spec, cont, horizon);
    state = std::move(next);
    if (!observe(seg, state)) return state;
    if (seg.truncated || state.t >= horizon) return state;
  }
  throw NumericError("flow: segment cap exceeded");
}

template <class T>
std::vector<SegmentRecord<T>> flow_trajectory(const FlowState<T>& start, const DynamicsSpec<T>& spec,
                                              double t_end, const FlowOptions& opt = {}) {
  std::vector<SegmentRecord<T>> out;
  flow<T>(start, spec, t_end,
          [&](const SegmentRecord<T>& seg, const FlowState<T>&) {
            out.push_back(seg);
            return true;
          },
          opt);
  return out;
}

// Fictitious-play time: s = e^t applied to segment boundaries; the path in
// state space is unchanged.
template <class T>
std::vector<SegmentRecord<T>> reparametrize_fictitious_play(std::vector<SegmentRecord<T>> traj) {
  for (auto& seg : traj) {
    seg.t_enter = std::exp(seg.t_enter);
    seg.t_exit = std::exp(seg.t_exit);
  }
  return traj;
}

}  // namespace pwflow
