#pragma once

#include "pwflow/game.hpp"

// Symplectic structure of the flow: tangent-space projections, the
// set-valued Hamiltonian vector field, and the radial projection onto
// level sets of H.

namespace pwflow {

template <class T>
struct SymplecticForm {
  Mat<T> a;  // coefficients of sum a_ij dp_i ^ dq_j
};

template <class T>
struct ProjectionPair {
  Mat<T> p_p;  // projection onto TSigma along A'^-1 1
  Mat<T> p_q;  // projection onto TSigma along A^-1 1
  Mat<T> a_inv;
  Vec<T> a_inv_one;    // A^-1 1
  Vec<T> at_inv_one;   // A'^-1 1
  T one_a_inv_one{};   // 1' A^-1 1
};

template <class T>
ProjectionPair<T> build_projections(const SymplecticForm<T>& form) {
  const size_t n = form.a.rows();
  if (form.a.cols() != n) throw DimensionError("build_projections: A not square");
  ProjectionPair<T> pp;
  if (!invert(form.a, pp.a_inv)) throw NumericError("build_projections: singular A");
  if constexpr (!scalar_traits<T>::exact) {
    if (scalar_traits<T>::abs(determinant(form.a)) <= T(1e-12))
      throw NumericError("build_projections: A determinant below 1e-12");
  }
  pp.a_inv_one = pp.a_inv.mul(ones<T>(n));
  pp.at_inv_one = pp.a_inv.tmul(ones<T>(n));  // (A^-1)' 1 = A'^-1 1
  pp.one_a_inv_one = pp.a_inv_one.sum();
  if (pp.one_a_inv_one == T(0)) throw NumericError("build_projections: 1'A^-1 1 = 0");
  if constexpr (!scalar_traits<T>::exact) {
    if (scalar_traits<T>::abs(pp.one_a_inv_one) <= T(1e-12))
      throw NumericError("build_projections: 1'A^-1 1 = 0");
  }
  pp.p_p = Mat<T>::identity(n);
  pp.p_q = Mat<T>::identity(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      pp.p_p(i, j) -= pp.at_inv_one[i] / pp.one_a_inv_one;
      pp.p_q(i, j) -= pp.a_inv_one[i] / pp.one_a_inv_one;
    }
  return pp;
}

// Max-abs deviation of the commutation identity (P_q A^-1)' = P_p A'^-1;
// zero in exact arithmetic for any invertible A.
template <class T>
T verify_symplectic_identity(const SymplecticForm<T>& form) {
  auto pp = build_projections(form);
  Mat<T> lhs = pp.p_q.mul(pp.a_inv).transposed();
  Mat<T> rhs = pp.p_p.mul(pp.a_inv.transposed());
  return (lhs - rhs).max_abs();
}

template <class T>
struct VelocityPair {
  Vec<T> vp, vq;
  size_t i, j;  // 0-based best-response vertices generating it
};

// Vertex set of the differential inclusion dp/dt in P_p A'^-1 M' BR_p(q),
// dq/dt in P_q A^-1 M BR_q(p); the value set is the convex hull of these.
template <class T>
std::vector<VelocityPair<T>> hamiltonian_vector_field(const GameMatrix<T>& g,
                                                      const SymplecticForm<T>& form,
                                                      const Vec<T>& p, const Vec<T>& q) {
  if (g.rows() != g.cols()) throw DimensionError("hamiltonian_vector_field: m != n");
  auto pp = build_projections(form);
  auto brp = best_response(g, q, Side::P);
  auto brq = best_response(g, p, Side::Q);
  Mat<T> vp_map = pp.p_p.mul(pp.a_inv.transposed()).mul(g.m.transposed());
  Mat<T> vq_map = pp.p_q.mul(pp.a_inv).mul(g.m);
  std::vector<VelocityPair<T>> out;
  for (size_t i : brp.support)
    for (size_t j : brq.support)
      out.push_back({vp_map.col(i), vq_map.col(j), i, j});
  return out;
}

template <class T>
struct LevelSetPoint {
  Vec<T> p, q;
  T rho{};
};

// Radial projection onto H^-1(rho): the unique point on the ray from the
// equilibrium through (p,q) with H = rho.  H restricted to the ray is convex,
// piecewise affine and increasing, so affine-model steps inside a bracket
// terminate; a bisection fallback caps the iteration count.
template <class T>
LevelSetPoint<T> project_to_level_set(const GameMatrix<T>& g, const NashEquilibrium<T>& eq,
                                      const Vec<T>& p, const Vec<T>& q, const T& rho,
                                      bool require_simplex = true) {
  if (rho <= T(0)) throw NumericError("project_to_level_set: rho must be > 0");
  Vec<T> dp = p - eq.p_bar, dq = q - eq.q_bar;
  if (dp.max_abs() == T(0) && dq.max_abs() == T(0))
    throw NumericError("project_to_level_set: input equals the equilibrium");

  auto h_at = [&](const T& c) {
    return hamiltonian_value(g, eq.p_bar + c * dp, eq.q_bar + c * dq);
  };
  T h1 = h_at(T(1));
  if (h1 <= T(0)) throw NumericError("project_to_level_set: ray direction degenerate");

  // Bracket rho.
  T lo(0), hi(1);
  T h_hi = h1;
  while (h_hi < rho) {
    hi *= T(2);
    h_hi = h_at(hi);
    if (to_double(hi) > 1e12) throw NumericError("project_to_level_set: rho unreachable");
  }

  T c = hi;
  const T level_tol = scalar_traits<T>::exact ? T(0) : T(1e-10) * std::max(T(1), rho);
  for (int iter = 0; iter < 200; ++iter) {
    T h_c = h_at(c);
    if (scalar_traits<T>::abs(h_c - rho) <= level_tol) break;
    if (h_c > rho) hi = c;
    else lo = c;
    // Affine model from the active supports at c: H(c') = h_c + slope (c'-c).
    Vec<T> pc = eq.p_bar + c * dp, qc = eq.q_bar + c * dq;
    auto brp = best_response(g, qc, Side::P);
    auto brq = best_response(g, pc, Side::Q);
    T slope = g.m.mul(dq)[brp.support.front()] - g.m.tmul(dp)[brq.support.front()];
    T next = slope != T(0) ? c + (rho - h_c) / slope : (lo + hi) / T(2);
    if (next <= lo || next >= hi) next = (lo + hi) / T(2);
    c = next;
  }
  if (!scalar_traits<T>::exact && scalar_traits<T>::abs(h_at(c) - rho) > T(1e-9) * std::max(T(1), rho))
    throw NumericError("project_to_level_set: ray solve did not converge");

  LevelSetPoint<T> out{eq.p_bar + c * dp, eq.q_bar + c * dq, rho};
  // With require_simplex off, points in the affine hulls are accepted; level
  // sets with large rho extend beyond the simplex product.
  T tol = scalar_traits<T>::exact ? T(0) : T(1e-9);
  if (require_simplex && (!is_simplex_point(out.p, tol) || !is_simplex_point(out.q, tol)))
    throw NumericError("project_to_level_set: rho too large, ray leaves the simplex pair");
  return out;
}

}  // namespace pwflow
