#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>

#include "pwflow/level_flow.hpp"

// The spanning disc of the hexagon orbit and its first return map: a radial
// fan of four triangles over the hexagon vertices, charted by an isometric
// development of the fan into the plane.  Crossing-to-crossing maps are
// linear about the equilibrium because every switching plane and every
// triangle cone plane passes through it.

namespace pwflow {

using ChartPoint = std::array<double, 2>;

inline double chart_dist(const ChartPoint& a, const ChartPoint& b) {
  double du = a[0] - b[0], dv = a[1] - b[1];
  return std::sqrt(du * du + dv * dv);
}

struct Section {
  PeriodicOrbit<double> boundary;           // the hexagon, 6 vertices
  Vec<double> origin;                       // stacked equilibrium
  std::vector<Vec<double>> vertex;          // boundary vertices, stacked
  std::array<std::array<size_t, 3>, 4> tri;  // fan triangles, apex first
  std::array<std::array<Vec<double>, 3>, 4> edge;        // V[tri[k][c]] - origin
  std::array<std::vector<Vec<double>>, 4> plane_basis;   // orthonormal, 3 per triangle
  std::array<Vec<double>, 4> plane_normal;  // unit, within the sum-zero subspace
  std::array<ChartPoint, 6> chart_vertex;   // development, apex at (0, 0)
  double cone_angle = 0.0;                  // apex angle sum of the development
  double level_deviation = 0.0;             // max |H - 1| over flat triangle interiors

  size_t apex() const { return tri[0][0]; }
};

namespace detail {

// Barycentric coordinates of the central projection of x onto the triangle
// plane: the Gram solve of x - O against the edge vectors, normalized.
// Fails (returns false) when x - O leaves the cone plane or points backwards.
inline bool cone_barycentric(const Section& sec, size_t k, const Vec<double>& x,
                             std::array<double, 3>& lambda) {
  Mat<double> gram(3, 3);
  Vec<double> b(3);
  Vec<double> r = x - sec.origin;
  for (size_t i = 0; i < 3; ++i) {
    b[i] = sec.edge[k][i].dot(r);
    for (size_t j = 0; j < 3; ++j) gram(i, j) = sec.edge[k][i].dot(sec.edge[k][j]);
  }
  Vec<double> y;
  if (!solve_linear(gram, b, y)) return false;
  double s = y[0] + y[1] + y[2];
  if (s <= 0) return false;
  for (size_t i = 0; i < 3; ++i) lambda[i] = y[i] / s;
  return true;
}

}  // namespace detail

// Chart coordinates of a point on the cone over triangle k.
inline ChartPoint chart_project(const Section& sec, size_t k, const Vec<double>& x) {
  std::array<double, 3> lam;
  if (!detail::cone_barycentric(sec, k, x, lam))
    throw NumericError("chart_project: point off the triangle cone");
  ChartPoint c{0, 0};
  for (size_t i = 0; i < 3; ++i) {
    c[0] += lam[i] * sec.chart_vertex[sec.tri[k][i]][0];
    c[1] += lam[i] * sec.chart_vertex[sec.tri[k][i]][1];
  }
  return c;
}

// Chart point -> surface point: flat barycentric combination of the hexagon
// vertices, rescaled radially onto the level set.  Returns the triangle hit.
inline std::optional<Vec<double>> chart_lift(const Section& sec, const DynamicsSpec<double>& spec,
                                             const ChartPoint& c, size_t* tri_out = nullptr,
                                             double inside_tol = 1e-9) {
  for (size_t k = 0; k < 4; ++k) {
    const ChartPoint& a = sec.chart_vertex[sec.tri[k][0]];
    const ChartPoint& b = sec.chart_vertex[sec.tri[k][1]];
    const ChartPoint& d = sec.chart_vertex[sec.tri[k][2]];
    double det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
    if (det == 0) continue;
    double l1 = ((b[0] - c[0]) * (d[1] - c[1]) - (d[0] - c[0]) * (b[1] - c[1])) / det;
    double l2 = ((d[0] - c[0]) * (a[1] - c[1]) - (a[0] - c[0]) * (d[1] - c[1])) / det;
    double l3 = 1 - l1 - l2;
    if (l1 < -inside_tol || l2 < -inside_tol || l3 < -inside_tol) continue;
    Vec<double> f = sec.origin + l1 * sec.edge[k][0] + l2 * sec.edge[k][1] + l3 * sec.edge[k][2];
    auto [p, q] = unstack_state(f, spec.m());
    double h = hamiltonian_value(spec.game, p, q);
    if (h <= 1e-12) return std::nullopt;
    if (tri_out) *tri_out = k;
    return sec.origin + (1.0 / h) * (f - sec.origin);
  }
  return std::nullopt;
}

// 4-triangle fan disc over the hexagon, with chart and cone-plane frames.
// The two interior chords run from the apex vertex; the triangle interiors
// are realized on the level set by radial projection, and the distance of
// the flat triangles from the level set is recorded in level_deviation.
inline Section build_section(const PeriodicOrbit<double>& gamma, const DynamicsSpec<double>& spec) {
  if (gamma.itinerary.size() != 6 || gamma.vertices.size() != 6)
    throw NumericError("build_section: orbit is not a hexagon");
  Section sec;
  sec.boundary = gamma;
  sec.origin = stack_state(spec.eq.p_bar, spec.eq.q_bar);
  sec.vertex = gamma.vertices;
  const size_t apex = 3;
  sec.tri = {{{apex, 4, 5}, {apex, 5, 0}, {apex, 0, 1}, {apex, 1, 2}}};

  Vec<double> sum_p(sec.origin.size()), sum_q(sec.origin.size());
  for (size_t i = 0; i < spec.m(); ++i) sum_p[i] = 1;
  for (size_t j = 0; j < spec.n(); ++j) sum_q[spec.m() + j] = 1;

  for (size_t k = 0; k < 4; ++k) {
    for (size_t c = 0; c < 3; ++c) sec.edge[k][c] = sec.vertex[sec.tri[k][c]] - sec.origin;
    std::vector<Vec<double>> basis;
    for (size_t c = 0; c < 3; ++c) {
      Vec<double> v = sec.edge[k][c];
      for (const auto& u : basis) v -= v.dot(u) * u;
      double n = std::sqrt(v.dot(v));
      if (n <= 1e-12) throw NumericError("build_section: degenerate triangle");
      sec.plane_basis[k].push_back((1.0 / n) * v);
      basis.push_back(sec.plane_basis[k].back());
    }
    // unit normal to the cone plane inside the sum-zero subspace
    std::vector<Vec<double>> span = {sum_p, sum_q};
    for (const auto& b : basis) span.push_back(b);
    bool found = false;
    for (size_t cand = 0; cand < sec.origin.size() && !found; ++cand) {
      Vec<double> v(sec.origin.size());
      v[cand] = 1;
      for (const auto& u : span) v -= (v.dot(u) / u.dot(u)) * u;
      double n = std::sqrt(v.dot(v));
      if (n > 1e-6) {
        sec.plane_normal[k] = (1.0 / n) * v;
        found = true;
      }
    }
    if (!found) throw NumericError("build_section: no cone plane normal");
  }

  // development: vertices at polar coordinates, angles accumulated over the fan
  for (auto& cv : sec.chart_vertex) cv = {0, 0};
  double phi = 0.0;
  for (size_t k = 0; k < 4; ++k) {
    const Vec<double>& ea = sec.edge[k][1];
    const Vec<double>& eb = sec.edge[k][2];
    double ra = std::sqrt(ea.dot(ea)), rb = std::sqrt(eb.dot(eb));
    double ct = ea.dot(eb) / (ra * rb);
    ct = std::max(-1.0, std::min(1.0, ct));
    double theta = std::acos(ct);
    if (k == 0) sec.chart_vertex[sec.tri[k][1]] = {ra, 0.0};
    phi += theta;
    sec.chart_vertex[sec.tri[k][2]] = {rb * std::cos(phi), rb * std::sin(phi)};
  }
  sec.cone_angle = phi;

  // flat triangles against the level set, sampled over the interiors
  double dev = 0.0;
  for (size_t k = 0; k < 4; ++k)
    for (int a = 0; a <= 8; ++a)
      for (int b = 0; a + b <= 8; ++b) {
        double l1 = a / 8.0, l2 = b / 8.0, l3 = 1.0 - l1 - l2;
        Vec<double> f = sec.origin + l1 * sec.edge[k][0] + l2 * sec.edge[k][1] + l3 * sec.edge[k][2];
        auto [p, q] = unstack_state(f, spec.m());
        dev = std::max(dev, std::fabs(hamiltonian_value(spec.game, p, q) - 1.0));
      }
  sec.level_deviation = dev;
  return sec;
}

struct SectionCrossing {
  bool found = false;
  double s = 0.0;
  size_t tri = 0;
  Vec<double> x;
  double margin = 0.0;  // |n.dir| / |dir| at the crossing
  std::vector<std::pair<size_t, size_t>> cells;  // cells traversed, last is the arrival cell
};

// Earliest transversal intersection of the forward orbit with one of the
// four triangle cones, skipping crossings at or before s_min.  Near-tangent
// hits (margin below margin_rel) are not eligible returns.
inline SectionCrossing next_crossing(const Section& sec, const DynamicsSpec<double>& spec,
                                     const Vec<double>& x_start, double s_min = 1e-9,
                                     double s_cap = 500.0, double margin_rel = 1e-6) {
  SectionCrossing best;
  std::vector<std::pair<size_t, size_t>> cells;
  auto [p, q] = unstack_state(x_start, spec.m());
  LevelObserver<double> obs = [&](const TranslationSegment<double>& seg) {
    cells.emplace_back(seg.ip, seg.jq);
    double len = seg.s_exit - seg.s_enter;
    double dn = std::sqrt(seg.dir.dot(seg.dir));
    for (size_t k = 0; k < 4; ++k) {
      const Vec<double>& n = sec.plane_normal[k];
      double nd = n.dot(seg.dir);
      if (std::fabs(nd) < margin_rel * dn) continue;
      double s = -n.dot(seg.x_enter - sec.origin) / nd;
      double s_global = seg.s_enter + s;
      if (s < 0 || s > len || s_global <= s_min) continue;
      if (best.found && s_global >= best.s) continue;
      Vec<double> x = seg.x_enter + s * seg.dir;
      std::array<double, 3> lam;
      if (!detail::cone_barycentric(sec, k, x, lam)) continue;
      if (lam[0] < -1e-9 || lam[1] < -1e-9 || lam[2] < -1e-9) continue;
      best.found = true;
      best.s = s_global;
      best.tri = k;
      best.x = x;
      best.margin = std::fabs(nd) / dn;
      best.cells = cells;
    }
    return !(best.found && best.s <= seg.s_exit);
  };
  level_flow(p, q, spec, 0.0, s_cap, obs);
  return best;
}

struct SectionReturn {
  ChartPoint point;
  double return_s = 0.0;
  size_t tri_in = 0, tri_out = 0;
  double margin = 0.0;
  std::vector<std::pair<size_t, size_t>> cells;
  Vec<double> x_in, x_out;
};

// Return map from an ambient point on the cone of a known triangle.  Used
// for chained iteration, so the entry triangle stays the arrival triangle
// of the previous crossing and keeps its transversality margin.
inline SectionReturn return_map_ambient(const Vec<double>& x_in, size_t tri_in,
                                        const Section& sec, const DynamicsSpec<double>& spec,
                                        double s_cap = 500.0) {
  SectionCrossing cr = next_crossing(sec, spec, x_in, 1e-9, s_cap);
  if (!cr.found)
    throw NumericError("return_map_S: no transversal return within the s-cap");
  SectionReturn ret;
  ret.point = chart_project(sec, cr.tri, cr.x);
  ret.return_s = cr.s;
  ret.tri_in = tri_in;
  ret.tri_out = cr.tri;
  ret.margin = cr.margin;
  ret.cells = cr.cells;
  ret.x_in = x_in;
  ret.x_out = cr.x;
  return ret;
}

// First return map of the disc in chart coordinates.
inline SectionReturn return_map_S(const ChartPoint& point, const Section& sec,
                                  const DynamicsSpec<double>& spec, double s_cap = 500.0) {
  size_t k_in = 0;
  auto x = chart_lift(sec, spec, point, &k_in);
  if (!x) throw NumericError("return_map_S: point not on the section");
  return return_map_ambient(*x, k_in, sec, spec, s_cap);
}

struct SectionOrbit {
  std::vector<ChartPoint> samples;
  std::vector<double> return_times;
  std::vector<std::vector<std::pair<size_t, size_t>>> itineraries;
};

inline SectionOrbit section_orbit(const ChartPoint& start, size_t returns, const Section& sec,
                                  const DynamicsSpec<double>& spec, double s_cap = 500.0) {
  SectionOrbit orb;
  orb.samples.push_back(start);
  ChartPoint c = start;
  for (size_t i = 0; i < returns; ++i) {
    SectionReturn r = return_map_S(c, sec, spec, s_cap);
    orb.samples.push_back(r.point);
    orb.return_times.push_back(r.return_s);
    orb.itineraries.push_back(r.cells);
    c = r.point;
  }
  return orb;
}

// Max chart deviation when each consecutive pair is re-derived by one
// application of the return map.
inline double verify_section_orbit(const SectionOrbit& orb, const Section& sec,
                                   const DynamicsSpec<double>& spec) {
  double worst = 0.0;
  for (size_t i = 0; i + 1 < orb.samples.size(); ++i) {
    SectionReturn r = return_map_S(orb.samples[i], sec, spec);
    worst = std::max(worst, chart_dist(r.point, orb.samples[i + 1]));
  }
  return worst;
}

namespace detail {

inline Hyperplane<double> cone_plane(const Section& sec, size_t k) {
  Hyperplane<double> h;
  h.normal = sec.plane_normal[k];
  h.offset = sec.plane_normal[k].dot(sec.origin);
  return h;
}

}  // namespace detail

// Composed crossing map for one return: from the cone plane of the entry
// triangle, through the listed cells, onto the cone plane of the exit
// triangle.  Linear about the equilibrium, since every plane contains it.
inline AffinePiece<double> section_piece(const std::vector<std::pair<size_t, size_t>>& cells,
                                         size_t tri_out, const Section& sec,
                                         const DynamicsSpec<double>& spec) {
  if (cells.empty()) throw NumericError("section_piece: empty cell list");
  AffinePiece<double> piece;
  piece.itinerary = cells;
  piece.section_out = detail::cone_plane(sec, tri_out);
  piece.matrix = Mat<double>::identity(sec.origin.size());
  piece.offset = Vec<double>(sec.origin.size());
  for (size_t k = 0; k < cells.size(); ++k) {
    Vec<double> v = level_direction(spec, cells[k].first, cells[k].second);
    Hyperplane<double> exit_plane = (k + 1 < cells.size())
                                        ? detail::between_cells(spec, cells[k], cells[k + 1])
                                        : piece.section_out;
    detail::append_leg(piece.matrix, piece.offset, v, exit_plane);
  }
  return piece;
}

namespace detail {

// Gradient of H linearized in the given cell.
inline Vec<double> cell_level_gradient(const DynamicsSpec<double>& spec,
                                       std::pair<size_t, size_t> cell) {
  const size_t m = spec.m(), n = spec.n();
  Vec<double> g(m + n);
  for (size_t j = 0; j < n; ++j) g[m + j] = spec.game.m(cell.first, j);
  for (size_t i = 0; i < m; ++i) g[i] -= spec.game.m(i, cell.second);
  return g;
}

// Orthonormal basis of the surface tangent at a point of a triangle cone:
// the cone plane intersected with the level kernel of the local cell.
inline std::array<Vec<double>, 2> surface_tangent(const Section& sec, size_t k,
                                                  std::pair<size_t, size_t> cell,
                                                  const DynamicsSpec<double>& spec) {
  Vec<double> grad = cell_level_gradient(spec, cell);
  std::array<Vec<double>, 2> out;
  size_t got = 0;
  // project the level gradient out of the plane basis
  Vec<double> g_in(sec.origin.size());
  for (const auto& b : sec.plane_basis[k]) g_in += grad.dot(b) * b;
  double gn = std::sqrt(g_in.dot(g_in));
  if (gn <= 1e-12) throw NumericError("surface_tangent: level gradient off the cone plane");
  g_in *= 1.0 / gn;
  for (const auto& b : sec.plane_basis[k]) {
    Vec<double> v = b - b.dot(g_in) * g_in;
    for (size_t i = 0; i < got; ++i) v -= v.dot(out[i]) * out[i];
    double n = std::sqrt(v.dot(v));
    if (n > 1e-9) {
      out[got++] = (1.0 / n) * v;
      if (got == 2) return out;
    }
  }
  throw NumericError("surface_tangent: degenerate tangent frame");
}

// Transversal flux form: the volume spanned by the radial direction, the
// flow direction, two tangent vectors and the two simplex sum normals.
// Invariant under the crossing maps, so return-map pieces have unit area
// determinant in frames weighted by it.
inline double flux_form(const Vec<double>& x, const Vec<double>& origin, const Vec<double>& dir,
                        const Vec<double>& b1, const Vec<double>& b2, size_t m, size_t n) {
  Mat<double> a(m + n, 6);
  for (size_t r = 0; r < m + n; ++r) {
    a(r, 0) = x[r] - origin[r];
    a(r, 1) = dir[r];
    a(r, 2) = b1[r];
    a(r, 3) = b2[r];
    a(r, 4) = r < m ? 1.0 : 0.0;
    a(r, 5) = r < m ? 0.0 : 1.0;
  }
  if (m + n != 6) throw DimensionError("flux_form: needs a 3x3 game");
  return determinant(a);
}

}  // namespace detail

struct PieceDets {
  double chart_det = 0.0;  // chart Lebesgue determinant at the base point
  double area_det = 0.0;   // determinant in flux-weighted (area-true) frames
};

// Derivative determinants of one return-map piece at a base point on the
// entry cone.  The chart determinant depends on the base point because the
// chart is a central projection; the area determinant is the one preserved
// by the flow.
inline PieceDets piece_dets(const AffinePiece<double>& piece, size_t tri_in, size_t tri_out,
                            const Vec<double>& x_in, const Vec<double>& x_out, const Section& sec,
                            const DynamicsSpec<double>& spec) {
  auto t_in = detail::surface_tangent(sec, tri_in, piece.itinerary.front(), spec);
  auto t_out = detail::surface_tangent(sec, tri_out, piece.itinerary.back(), spec);
  Vec<double> a1 = piece.matrix.mul(t_in[0]);
  Vec<double> a2 = piece.matrix.mul(t_in[1]);
  Mat<double> j(2, 2);
  j(0, 0) = a1.dot(t_out[0]);
  j(1, 0) = a1.dot(t_out[1]);
  j(0, 1) = a2.dot(t_out[0]);
  j(1, 1) = a2.dot(t_out[1]);
  PieceDets out;
  double jd = determinant(j);

  Vec<double> d_in = level_direction(spec, piece.itinerary.front().first,
                                     piece.itinerary.front().second);
  Vec<double> d_out = level_direction(spec, piece.itinerary.back().first,
                                      piece.itinerary.back().second);
  double w_in = detail::flux_form(x_in, sec.origin, d_in, t_in[0], t_in[1], spec.m(), spec.n());
  double w_out = detail::flux_form(x_out, sec.origin, d_out, t_out[0], t_out[1], spec.m(), spec.n());
  if (w_in == 0.0) throw NumericError("piece_dets: degenerate flux frame");
  out.area_det = jd * w_out / w_in;

  // chart determinant: push the tangent frames through the chart derivative
  auto chart_deriv = [&](size_t k, const Vec<double>& x, const Vec<double>& w) -> ChartPoint {
    Mat<double> gram(3, 3);
    Vec<double> b(3), db(3);
    Vec<double> r = x - sec.origin;
    for (size_t i = 0; i < 3; ++i) {
      b[i] = sec.edge[k][i].dot(r);
      db[i] = sec.edge[k][i].dot(w);
      for (size_t jj = 0; jj < 3; ++jj) gram(i, jj) = sec.edge[k][i].dot(sec.edge[k][jj]);
    }
    Vec<double> y, dy;
    if (!solve_linear(gram, b, y) || !solve_linear(gram, db, dy))
      throw NumericError("piece_dets: chart derivative solve failed");
    double s = y[0] + y[1] + y[2], ds = dy[0] + dy[1] + dy[2];
    ChartPoint out2{0, 0};
    for (size_t i = 0; i < 3; ++i) {
      double dl = (dy[i] * s - y[i] * ds) / (s * s);
      out2[0] += dl * sec.chart_vertex[sec.tri[k][i]][0];
      out2[1] += dl * sec.chart_vertex[sec.tri[k][i]][1];
    }
    return out2;
  };
  ChartPoint u1 = chart_deriv(tri_in, x_in, t_in[0]);
  ChartPoint u2 = chart_deriv(tri_in, x_in, t_in[1]);
  ChartPoint v1 = chart_deriv(tri_out, x_out, a1);
  ChartPoint v2 = chart_deriv(tri_out, x_out, a2);
  double den = u1[0] * u2[1] - u1[1] * u2[0];
  double num = v1[0] * v2[1] - v1[1] * v2[0];
  if (den == 0.0) throw NumericError("piece_dets: degenerate chart frame");
  out.chart_det = num / den;
  return out;
}

struct SectionPeriodicPoint {
  ChartPoint chart{};
  Vec<double> x;
  size_t period_k = 0;
  double period_s = 0.0;
  double eig_mod[2] = {0, 0};   // transversal eigenvalue moduli
  bool complex_pair = false;
  bool elliptic = false;        // complex pair with both moduli within 1e-6 of 1
  bool saddle = false;
  double area_det = 0.0;
  double residual = 0.0;        // re-flow closure in chart
  std::vector<std::pair<size_t, size_t>> cells;  // full flow itinerary of the cycle
};

// Itinerary-guided period-k points: observed k-cycles of return symbols in
// the region seed an exact eigenvector solve of the composed crossing map.
// The composed map is linear about the equilibrium; periodic points are its
// unit-eigenvalue rays scaled to the level set.
inline std::vector<SectionPeriodicPoint> find_periodic_points(
    size_t k, const std::array<double, 4>& region /* umin umax vmin vmax */, const Section& sec,
    const DynamicsSpec<double>& spec, size_t grid = 12, size_t settle = 40) {
  if (k == 0) throw DimensionError("find_periodic_points: k must be >= 1");
  struct Candidate {
    size_t tri_in;
    std::vector<std::pair<size_t, size_t>> cells;           // concatenated over k returns
    std::vector<std::pair<size_t, std::vector<std::pair<size_t, size_t>>>> legs;
  };
  std::set<std::string> seen_keys;
  std::vector<Candidate> cands;

  auto push_candidate = [&](const std::vector<std::pair<size_t, SectionReturn>>& window) {
    Candidate c;
    c.tri_in = window.front().first;
    std::string key = std::to_string(c.tri_in) + "|";
    for (const auto& [tri, ret] : window) {
      c.legs.push_back({ret.tri_out, ret.cells});
      for (auto cell : ret.cells) {
        c.cells.push_back(cell);
        key += std::to_string(cell.first) + std::to_string(cell.second);
      }
      key += "/" + std::to_string(ret.tri_out);
    }
    if (seen_keys.insert(key).second) cands.push_back(std::move(c));
  };

  for (size_t gu = 0; gu <= grid; ++gu)
    for (size_t gv = 0; gv <= grid; ++gv) {
      ChartPoint c{region[0] + (region[1] - region[0]) * gu / grid,
                   region[2] + (region[3] - region[2]) * gv / grid};
      size_t tri = 0;
      if (!chart_lift(sec, spec, c, &tri)) continue;
      std::vector<std::pair<size_t, SectionReturn>> hist;
      std::vector<ChartPoint> pts{c};
      try {
        for (size_t it = 0; it < settle + 2 * k; ++it) {
          SectionReturn r = return_map_S(c, sec, spec);
          hist.push_back({tri, r});
          tri = r.tri_out;
          c = r.point;
          pts.push_back(c);
        }
      } catch (const NumericError&) {
      }
      if (hist.size() < k) continue;
      // shadowing passes: windows of k returns that come back near their
      // start, or repeat their symbols exactly over 2k returns
      double close = 0.0;
      for (const auto& cv : sec.chart_vertex)
        close = std::max(close, 0.05 * chart_dist(cv, {0, 0}));
      for (size_t start = 0; start + k < pts.size(); ++start) {
        bool cand = chart_dist(pts[start], pts[start + k]) < close;
        if (!cand && start + 2 * k <= hist.size()) {
          cand = true;
          for (size_t i = 0; i < k && cand; ++i) {
            const auto& a = hist[start + i];
            const auto& b = hist[start + i + k];
            cand = a.first == b.first && a.second.cells == b.second.cells &&
                   a.second.tri_out == b.second.tri_out;
          }
        }
        if (cand)
          push_candidate({hist.begin() + start, hist.begin() + start + k});
      }
    }

  std::vector<SectionPeriodicPoint> out;
  for (const auto& cand : cands) {
    // minimal symbolic period must be exactly k
    bool proper = true;
    for (size_t d = 1; d < k; ++d) {
      if (k % d != 0) continue;
      bool rep = true;
      for (size_t i = 0; i < k && rep; ++i)
        rep = cand.legs[i].second == cand.legs[i % d].second &&
              cand.legs[i].first == cand.legs[i % d].first;
      if (rep) {
        proper = false;
        break;
      }
    }
    if (!proper) continue;

    // composed linear map over the k returns
    Mat<double> a = Mat<double>::identity(sec.origin.size());
    try {
      for (const auto& [tri_out, cells] : cand.legs) {
        AffinePiece<double> piece = section_piece(cells, tri_out, sec, spec);
        a = piece.matrix.mul(a);
      }
    } catch (const NumericError&) {
      continue;
    }
    const auto& basis = sec.plane_basis[cand.tri_in];
    Mat<double> b(3, 3);
    for (size_t c = 0; c < 3; ++c) {
      Vec<double> img = a.mul(basis[c]);
      for (size_t r = 0; r < 3; ++r) b(r, c) = img.dot(basis[r]);
    }
    // unit eigenvector via the adjugate of B - I
    Mat<double> n = b;
    for (size_t i = 0; i < 3; ++i) n(i, i) -= 1.0;
    Mat<double> adj(3, 3);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) {
        size_t r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
        adj(i, j) = n(r0, c0) * n(r1, c1) - n(r0, c1) * n(r1, c0);
      }
    size_t best_col = 0;
    double best_norm = -1;
    for (size_t j = 0; j < 3; ++j) {
      double s = adj(0, j) * adj(0, j) + adj(1, j) * adj(1, j) + adj(2, j) * adj(2, j);
      if (s > best_norm) {
        best_norm = s;
        best_col = j;
      }
    }
    if (best_norm <= 1e-20) continue;  // unit eigenvalue not simple, or absent
    // reject shadow itineraries that carry no unit eigenvalue
    {
      Vec<double> v3(3);
      for (size_t c = 0; c < 3; ++c) v3[c] = adj(c, best_col);
      v3 *= 1.0 / std::sqrt(v3.dot(v3));
      Vec<double> res = b.mul(v3) - v3;
      if (res.max_abs() > 1e-6) continue;
    }
    Vec<double> v(sec.origin.size());
    for (size_t c = 0; c < 3; ++c) v += adj(c, best_col) * basis[c];
    // scale onto the level set, trying both ray directions
    SectionPeriodicPoint pt;
    bool placed = false;
    for (double sign : {1.0, -1.0}) {
      Vec<double> y = sec.origin + sign * v;
      auto [p, q] = unstack_state(y, spec.m());
      double h = hamiltonian_value(spec.game, p, q);
      if (h <= 1e-12) continue;
      Vec<double> x = sec.origin + (sign / h) * v;
      std::array<double, 3> lam;
      if (!detail::cone_barycentric(sec, cand.tri_in, x, lam)) continue;
      if (lam[0] < -1e-6 || lam[1] < -1e-6 || lam[2] < -1e-6) continue;
      pt.x = x;
      placed = true;
      break;
    }
    if (!placed) continue;
    pt.period_k = k;
    pt.chart = chart_project(sec, cand.tri_in, pt.x);
    pt.cells = cand.cells;

    // dynamic validation: k returns must close up and replay the symbols
    try {
      ChartPoint c = pt.chart;
      double total_s = 0.0;
      bool ok = true;
      for (size_t i = 0; i < k; ++i) {
        SectionReturn r = return_map_S(c, sec, spec);
        if (r.cells != cand.legs[i].second || r.tri_out != cand.legs[i].first) {
          ok = false;
          break;
        }
        total_s += r.return_s;
        c = r.point;
      }
      if (!ok) continue;
      pt.period_s = total_s;
      pt.residual = chart_dist(c, pt.chart);
      if (pt.residual > 1e-8) continue;
    } catch (const NumericError&) {
      continue;
    }

    // transversal eigenvalues: quotient of B by the unit eigendirection
    Vec<double> v3(3);
    for (size_t c = 0; c < 3; ++c) v3[c] = adj(c, best_col);
    v3 *= 1.0 / std::sqrt(v3.dot(v3));
    std::vector<Vec<double>> w;
    for (size_t cand_i = 0; cand_i < 3 && w.size() < 2; ++cand_i) {
      Vec<double> u(3);
      u[cand_i] = 1;
      u -= u.dot(v3) * v3;
      for (const auto& ww : w) u -= u.dot(ww) * ww;
      double nn = std::sqrt(u.dot(u));
      if (nn > 1e-9) w.push_back((1.0 / nn) * u);
    }
    if (w.size() < 2) continue;
    Mat<double> q2(2, 2);
    for (size_t cc = 0; cc < 2; ++cc) {
      Vec<double> img = b.mul(w[cc]);
      for (size_t r = 0; r < 2; ++r) q2(r, cc) = img.dot(w[r]);
    }
    double tr = q2(0, 0) + q2(1, 1), det = determinant(q2);
    // at a fixed point the frames cancel, so the transversal eigenvalue
    // product is the area determinant
    pt.area_det = det;
    double disc = tr * tr / 4 - det;
    if (disc < 0) {
      pt.complex_pair = true;
      double mod = std::sqrt(det);
      pt.eig_mod[0] = pt.eig_mod[1] = mod;
      pt.elliptic = std::fabs(mod - 1.0) <= 1e-6;
    } else {
      double l1 = tr / 2 + std::sqrt(disc), l2 = tr / 2 - std::sqrt(disc);
      pt.eig_mod[0] = std::fabs(l1);
      pt.eig_mod[1] = std::fabs(l2);
      pt.saddle = std::max(pt.eig_mod[0], pt.eig_mod[1]) > 1.0 + 1e-6;
    }

    if (pt.chart[0] < region[0] - 1e-9 || pt.chart[0] > region[1] + 1e-9 ||
        pt.chart[1] < region[2] - 1e-9 || pt.chart[1] > region[3] + 1e-9)
      continue;
    bool dup = false;
    for (const auto& prev : out)
      if (chart_dist(prev.chart, pt.chart) < 1e-6) dup = true;
    if (!dup) out.push_back(pt);
  }
  return out;
}

struct AnnulusItinerary {
  std::vector<int> indices;  // n(i) >= 0, |n(i+1) - n(i)| <= 1
  double ratio = 0.5;        // geometric ratio of the annulus radii
  ChartPoint center{};       // chart point on the boundary transversal
};

struct AnnulusWitness {
  bool found = false;
  ChartPoint point{};
  size_t depth = 0;      // deepest prefix realized
  double outer_radius = 0.0;
};

// Contraction estimate at the hexagon: the smaller transversal eigenvalue
// modulus of the once-returning saddle piece.
inline double estimate_annulus_ratio(const Section& sec, const DynamicsSpec<double>& spec) {
  std::array<double, 4> all{-2.0, 2.0, -2.0, 2.0};
  auto pts = find_periodic_points(1, all, sec, spec, 16);
  for (const auto& pt : pts)
    if (pt.saddle) {
      double r = std::min(pt.eig_mod[0], pt.eig_mod[1]);
      if (r > 0 && r < 1) return r;
    }
  return 0.5;
}

// Nested refinement witness search: squares whose centers realize the
// prescribed annulus indices for the first i returns survive; survivors are
// subdivided until depth L.
inline AnnulusWitness realize_annulus_itinerary(const AnnulusItinerary& target, size_t depth_l,
                                                const Section& sec,
                                                const DynamicsSpec<double>& spec,
                                                size_t max_depth = 20) {
  if (depth_l > max_depth)
    throw DimensionError("realize_annulus_itinerary: depth exceeds the configured max");
  if (target.indices.size() < depth_l)
    throw DimensionError("realize_annulus_itinerary: itinerary shorter than the depth");
  if (target.ratio <= 0.0 || target.ratio >= 1.0)
    throw DimensionError("realize_annulus_itinerary: ratio must lie in (0, 1)");
  for (size_t i = 0; i < depth_l; ++i) {
    if (target.indices[i] < 0)
      throw DimensionError("realize_annulus_itinerary: negative annulus index");
    if (i + 1 < depth_l && std::abs(target.indices[i + 1] - target.indices[i]) > 1)
      throw DimensionError("realize_annulus_itinerary: annulus indices must step by at most one");
  }

  // outer radius: a fraction of the chart size so the outermost annulus
  // stays inside the disc near the center
  double scale = 0.0;
  for (const auto& cv : sec.chart_vertex) scale = std::max(scale, chart_dist(cv, target.center));
  double r0 = 0.15 * scale;
  const double lr = std::log(target.ratio);

  auto annulus_index = [&](const ChartPoint& c) -> int {
    double d = chart_dist(c, target.center);
    if (d >= r0 || d <= 0.0) return -1;
    return static_cast<int>(std::floor(std::log(d / r0) / lr));
  };
  auto prefix_depth = [&](ChartPoint c) -> size_t {
    if (annulus_index(c) != target.indices[0]) return 0;
    size_t ok = 1;
    try {
      for (size_t i = 1; i < depth_l; ++i) {
        c = return_map_S(c, sec, spec).point;
        if (annulus_index(c) != target.indices[i]) break;
        ++ok;
      }
    } catch (const NumericError&) {
    }
    return ok;
  };

  struct Square {
    ChartPoint c;
    double half;
  };
  // seed ring inside annulus n(0)
  std::vector<Square> pop;
  double rn = r0 * std::pow(target.ratio, target.indices[0]);
  double rn1 = rn * target.ratio;
  double half0 = (rn - rn1) / 4;
  for (int a = 0; a < 96; ++a) {
    double ang = 2 * 3.14159265358979323846 * a / 96;
    for (double f : {0.3, 0.5, 0.7}) {
      double rad = rn1 + f * (rn - rn1);
      ChartPoint c{target.center[0] + rad * std::cos(ang), target.center[1] + rad * std::sin(ang)};
      if (chart_lift(sec, spec, c)) pop.push_back({c, half0});
    }
  }

  AnnulusWitness best;
  best.outer_radius = r0;
  for (size_t round = 0; round < 14 && !pop.empty(); ++round) {
    std::vector<std::pair<size_t, Square>> scored;
    for (const auto& sq : pop) {
      size_t d = prefix_depth(sq.c);
      if (d > best.depth) {
        best.depth = d;
        best.point = sq.c;
      }
      if (d >= depth_l) {
        best.found = true;
        best.point = sq.c;
        best.depth = depth_l;
        return best;
      }
      scored.push_back({d, sq});
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    size_t keep = std::min<size_t>(scored.size(), 160);
    // drop squares that made no progress at all once refinement has begun
    pop.clear();
    for (size_t i = 0; i < keep; ++i) {
      if (round > 0 && scored[i].first + 2 < best.depth) break;
      const Square& sq = scored[i].second;
      double h = sq.half / 2;
      for (int dx : {-1, 1})
        for (int dy : {-1, 1}) {
          ChartPoint c{sq.c[0] + dx * h, sq.c[1] + dy * h};
          if (chart_lift(sec, spec, c)) pop.push_back({c, h});
        }
    }
  }
  return best;
}

}  // namespace pwflow
