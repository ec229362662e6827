#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pwflow/scalar.hpp"
#include "pwflow/section.hpp"

namespace pwflow {

// Planar model map F(z) = M . R_{1/|z|}(z) with the l1 "rotation" R.
// R slides points along the diamond |z1|+|z2| = const under a piecewise
// linear arclength parametrization: each of the four edges spans pi/2 of
// parameter, counterclockwise, so R has period 2*pi in theta and is
// piecewise affine in z for fixed theta.

template <class T>
struct L1Point {
  std::array<T, 2> z{};
  T norm1{};  // invariant: norm1 == |z[0]| + |z[1]|
};

template <class T>
L1Point<T> make_l1_point(const T& a, const T& b) {
  using st = scalar_traits<T>;
  return L1Point<T>{{a, b}, st::abs(a) + st::abs(b)};
}

template <class T>
struct ModelMapSpec {
  // diag(expand, contract); default det = 1
  std::array<T, 2> saddle{T(2), T(1) / T(2)};
  T annulus_ratio = T(1) / T(2);
};

namespace detail {

template <class T>
T pi_const() {
  // dyadic double value; exact conversion in rational mode, so composing a
  // rotation by 2*pi_const with this same constant cancels exactly
  return T(3.14159265358979323846264338327950288);
}

// Diamond parameter in quarter-turn units: p = edge + t, edge in {0..3},
// t in [0,1).  Edge k runs counterclockwise from vertex k of
// {(n,0),(0,n),(-n,0),(0,-n)}.
template <class T>
void diamond_param(const L1Point<T>& z, int& edge, T& t) {
  const T& a = z.z[0];
  const T& b = z.z[1];
  if (a > 0 && b >= 0) {
    edge = 0;
    t = b / z.norm1;
  } else if (a <= 0 && b > 0) {
    edge = 1;
    t = -a / z.norm1;
  } else if (a < 0 && b <= 0) {
    edge = 2;
    t = -b / z.norm1;
  } else {
    edge = 3;
    t = a / z.norm1;
  }
}

template <class T>
L1Point<T> diamond_point(int edge, const T& t, const T& n) {
  T s = t * n;
  std::array<T, 2> z;
  switch (edge & 3) {
    case 0: z = {n - s, s}; break;
    case 1: z = {-s, n - s}; break;
    case 2: z = {s - n, -s}; break;
    default: z = {s, s - n}; break;
  }
  // components along one edge have fixed signs, so the norm telescopes to n
  return L1Point<T>{z, n};
}

}  // namespace detail

template <class T>
L1Point<T> l1_rotate(const L1Point<T>& z, const T& theta) {
  if (!(z.norm1 > 0)) throw NumericError("l1_rotate: zero point");
  int edge;
  T t;
  detail::diamond_param(z, edge, t);
  T p = scalar_traits<T>::from_int(edge) + t +
        theta * T(2) / detail::pi_const<T>();
  // wrap into [0,4)
  double guess = std::floor(scalar_traits<T>::to_double(p) / 4.0);
  p -= scalar_traits<T>::from_int(static_cast<long>(guess) * 4);
  while (p < 0) p += T(4);
  while (p >= T(4)) p -= T(4);
  int e2 = static_cast<int>(scalar_traits<T>::to_double(p));
  while (e2 > 0 && scalar_traits<T>::from_int(e2) > p) --e2;
  while (e2 < 3 && scalar_traits<T>::from_int(e2 + 1) <= p) ++e2;
  return detail::diamond_point(e2, T(p - scalar_traits<T>::from_int(e2)),
                               z.norm1);
}

template <class T>
L1Point<T> model_map_step(const L1Point<T>& z, const ModelMapSpec<T>& spec) {
  if (!(z.norm1 > 0)) throw NumericError("model_map_step: zero point");
  L1Point<T> w = l1_rotate(z, T(T(1) / z.norm1));
  return make_l1_point(T(spec.saddle[0] * w.z[0]), T(spec.saddle[1] * w.z[1]));
}

template <class T>
L1Point<T> model_map_inverse(const L1Point<T>& y, const ModelMapSpec<T>& spec) {
  L1Point<T> w = make_l1_point(T(y.z[0] / spec.saddle[0]),
                               T(y.z[1] / spec.saddle[1]));
  if (!(w.norm1 > 0)) throw NumericError("model_map_inverse: zero point");
  return l1_rotate(w, T(-(T(1) / w.norm1)));
}

// Fixed points of F along a ray from the origin.  A fixed point at radius n
// and diamond parameter p needs D(p) = M D(p') with p' = p + 2/(pi*n) mod 4,
// where D is the unit diamond chart.  Per edge pair the component equations
// are affine in (t,t'), so each pair yields one angular solution and a
// geometric family of radii n = 2 / (pi * (p'-p+4k)), k = 0,1,2,...
struct ModelFixedPoint {
  std::array<double, 2> z;
  double radius = 0;
  double residual = 0;
};

inline std::vector<ModelFixedPoint> fixed_points_on_ray(
    const std::array<double, 2>& ray, double radius_lo, double radius_hi,
    const ModelMapSpec<double>& spec) {
  if (!(radius_lo > 0) || !(radius_hi > radius_lo))
    throw NumericError("fixed_points_on_ray: bad radius interval");
  double rn = std::fabs(ray[0]) + std::fabs(ray[1]);
  if (!(rn > 0)) throw NumericError("fixed_points_on_ray: zero ray");
  L1Point<double> u = make_l1_point(ray[0] / rn, ray[1] / rn);

  // affine edge charts d(t) = c + m*t of the unit diamond
  static const double c1[4] = {1, 0, -1, 0}, m1[4] = {-1, -1, 1, 1};
  static const double c2[4] = {0, 1, 0, -1}, m2[4] = {1, -1, -1, 1};
  const double a = spec.saddle[0], d = spec.saddle[1];
  const double pi = detail::pi_const<double>();

  std::vector<ModelFixedPoint> out;
  for (int e = 0; e < 4; ++e) {
    for (int e2 = 0; e2 < 4; ++e2) {
      // m1[e]*t - a*m1[e2]*t' = a*c1[e2] - c1[e], same for the d row
      double A00 = m1[e], A01 = -a * m1[e2], b0 = a * c1[e2] - c1[e];
      double A10 = m2[e], A11 = -d * m2[e2], b1 = d * c2[e2] - c2[e];
      double det = A00 * A11 - A01 * A10;
      if (std::fabs(det) < 1e-14) continue;
      double t = (b0 * A11 - b1 * A01) / det;
      double t2 = (A00 * b1 - A10 * b0) / det;
      if (t < -1e-12 || t >= 1.0 || t2 < -1e-12 || t2 >= 1.0) continue;
      L1Point<double> dp = detail::diamond_point(e, t, 1.0);
      if (std::fabs(dp.z[0] - u.z[0]) > 1e-9 ||
          std::fabs(dp.z[1] - u.z[1]) > 1e-9)
        continue;
      double shift = (e2 + t2) - (e + t);
      while (shift <= 0) shift += 4;
      for (;; shift += 4) {
        double n = 2.0 / (pi * shift);
        if (n < radius_lo) break;
        if (n > radius_hi) continue;
        L1Point<double> z = make_l1_point(n * dp.z[0], n * dp.z[1]);
        L1Point<double> fz = model_map_step(z, spec);
        double res = std::fabs(fz.z[0] - z.z[0]) + std::fabs(fz.z[1] - z.z[1]);
        if (res <= 1e-10) out.push_back({z.z, n, res});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ModelFixedPoint& x, const ModelFixedPoint& y) {
              return x.radius > y.radius;
            });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const ModelFixedPoint& x, const ModelFixedPoint& y) {
                          return std::fabs(x.radius - y.radius) < 1e-13;
                        }),
            out.end());
  return out;
}

// Annulus index of a norm under ratio r: A_n = { r^{n+1} <= |z| <= r^n }.
inline long model_annulus_index(double norm1, double ratio) {
  return static_cast<long>(std::floor(std::log(norm1) / std::log(ratio)));
}

// Deep itinerary searches use BigFloat: the cylinder set of an itinerary of
// length L shrinks like the product of the per-step angular sensitivities
// d(1/n)/dn = 1/n^2, far below double resolution for L ~ 30.

namespace detail {

template <class T>
T pow_int(const T& r, long e) {
  T out(1);
  for (long i = 0; i < e; ++i) out *= r;
  for (long i = 0; i > e; --i) out /= r;
  return out;
}

}  // namespace detail

// Matched prefix length of the annulus itinerary along the forward orbit,
// with closed-interval membership r^{n+1} <= |z| <= r^n.
template <class T>
size_t model_itinerary_depth(L1Point<T> z, const AnnulusItinerary& target,
                             size_t depth_l, const ModelMapSpec<T>& spec) {
  T r = T(target.ratio);
  for (size_t i = 0; i < depth_l; ++i) {
    long n = target.indices[i];
    if (z.norm1 < detail::pow_int(r, n + 1) || z.norm1 > detail::pow_int(r, n))
      return i;
    z = model_map_step(z, spec);
  }
  return depth_l;
}

template <class T>
struct ModelWitness {
  bool found = false;
  L1Point<T> point;
  size_t depth = 0;
};

// Nested refinement witness search for an annulus itinerary under F.  Mirrors
// realize_annulus_itinerary on the section but with the exact closed-form map,
// making it a fast oracle for the refinement scheme itself.  Use T = BigFloat
// for depths beyond ~15; the witness cylinder is then narrower than a double.
template <class T>
ModelWitness<T> realize_model_itinerary(const AnnulusItinerary& target,
                                        size_t depth_l,
                                        const ModelMapSpec<T>& spec) {
  if (!(target.ratio > 0 && target.ratio < 1))
    throw NumericError("realize_model_itinerary: ratio outside (0,1)");
  if (target.indices.size() < depth_l || depth_l < 2)
    throw NumericError("realize_model_itinerary: itinerary too short");
  for (size_t i = 0; i + 1 < depth_l; ++i) {
    long dn = target.indices[i + 1] - target.indices[i];
    if (dn > 1 || dn < -1)
      throw NumericError("realize_model_itinerary: non-local itinerary step");
  }

  auto lift = [&](const T& p, const T& rad) -> L1Point<T> {
    int e = static_cast<int>(scalar_traits<T>::to_double(p));
    while (e > 0 && scalar_traits<T>::from_int(e) > p) --e;
    while (e < 3 && scalar_traits<T>::from_int(e + 1) <= p) ++e;
    return detail::diamond_point(e, T(p - scalar_traits<T>::from_int(e)), rad);
  };
  auto prefix_depth = [&](const T& p, const T& rad) -> size_t {
    return model_itinerary_depth(lift(p, rad), target, depth_l, spec);
  };

  // beam search over (parameter, radius) rectangles in the seed annulus,
  // scoring each rectangle by the deepest matched prefix on a 3x3 sample grid
  struct Rect {
    T p0, p1, r0, r1;
    T bp{}, br{};  // best sample
    size_t depth = 0;
  };
  auto score = [&](Rect& rc) {
    rc.depth = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        T p = rc.p0 + (rc.p1 - rc.p0) * T(2 * i + 1) / T(6);
        T rad = rc.r0 + (rc.r1 - rc.r0) * T(2 * j + 1) / T(6);
        size_t d = prefix_depth(p, rad);
        if (d >= rc.depth) {
          rc.depth = d;
          rc.bp = p;
          rc.br = rad;
        }
      }
  };
  const long n0 = target.indices[0];
  const T rad_hi = detail::pow_int(T(target.ratio), n0);
  const T rad_lo = rad_hi * T(target.ratio);
  std::vector<Rect> pool;
  for (int ip = 0; ip < 96; ++ip)
    for (int ir = 0; ir < 8; ++ir) {
      Rect rc{T(4) * T(ip) / T(96), T(4) * T(ip + 1) / T(96),
              rad_lo + (rad_hi - rad_lo) * T(ir) / T(8),
              rad_lo + (rad_hi - rad_lo) * T(ir + 1) / T(8)};
      score(rc);
      pool.push_back(rc);
    }
  auto better = [](const Rect& x, const Rect& y) { return x.depth > y.depth; };
  const int max_rounds = 16 + 8 * static_cast<int>(depth_l);
  for (int round = 0; round < max_rounds; ++round) {
    std::sort(pool.begin(), pool.end(), better);
    if (pool.front().depth >= depth_l) break;
    if (pool.size() > 64) pool.resize(64);
    std::vector<Rect> next;
    for (const Rect& rc : pool) {
      T pm = (rc.p0 + rc.p1) / T(2), rm = (rc.r0 + rc.r1) / T(2);
      for (int qx = 0; qx < 2; ++qx)
        for (int qy = 0; qy < 2; ++qy) {
          Rect ch{qx ? pm : rc.p0, qx ? rc.p1 : pm, qy ? rm : rc.r0,
                  qy ? rc.r1 : rm};
          score(ch);
          next.push_back(ch);
        }
    }
    pool.swap(next);
  }
  std::sort(pool.begin(), pool.end(), better);
  const Rect& best = pool.front();
  ModelWitness<T> w;
  w.found = best.depth >= depth_l;
  w.point = lift(best.bp, best.br);
  w.depth = best.depth;
  return w;
}

}  // namespace pwflow
