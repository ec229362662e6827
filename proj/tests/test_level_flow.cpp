#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pwflow/level_flow.hpp"

using namespace pwflow;

namespace {

const std::vector<std::pair<size_t, size_t>> kHex = {{0, 1}, {1, 1}, {1, 2},
                                                     {2, 2}, {2, 0}, {0, 0}};

Vec<double> random_simplex(size_t n, std::mt19937_64& rng) {
  Vec<double> v(n);
  double s = 0;
  for (size_t i = 0; i < n; ++i) {
    v[i] = 0.02 + (rng() % 9973) / 9973.0;
    s += v[i];
  }
  for (size_t i = 0; i < n; ++i) v[i] /= s;
  return v;
}

const DynamicsSpec<double>& b_spec() {
  static DynamicsSpec<double> spec =
      make_spec(cyclic_matrix<double>(0.618), DynamicsKind::BestResponse);
  return spec;
}

}  // namespace

TEST_CASE("stack and unstack round trip") {
  Vec<double> p{0.2, 0.8}, q{0.1, 0.4, 0.5};
  auto x = stack_state(p, q);
  CHECK(x.size() == 5);
  auto [p2, q2] = unstack_state(x, 2);
  CHECK(p2 == p);
  CHECK(q2 == q);
}

TEST_CASE("level conservation and nonzero speeds") {
  const auto& spec = b_spec();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    // rho = 1 lands on the affine hull for most starts, like the hexagon does
    auto lp = project_to_level_set(spec.game, spec.eq, random_simplex(3, rng),
                                   random_simplex(3, rng), 1.0, false);
    auto segs = level_flow_segments<double>(lp.p, lp.q, spec, 0.0, 40.0);
    REQUIRE(!segs.empty());
    for (const auto& seg : segs) {
      auto [p, q] = unstack_state(seg.x_enter, 3);
      CHECK(std::fabs(hamiltonian_value(spec.game, p, q) - 1.0) <= 1e-10);
      CHECK(std::sqrt(seg.dir.dot(seg.dir)) >= 1e-8);
      CHECK(seg.s_exit >= seg.s_enter);
    }
    CHECK(segs.back().truncated);
    CHECK(segs.back().s_exit == doctest::Approx(40.0));
  }
}

TEST_CASE("zero-length request yields no segments") {
  const auto& spec = b_spec();
  std::mt19937_64 rng(4);
  auto lp = project_to_level_set(spec.game, spec.eq, random_simplex(3, rng),
                                 random_simplex(3, rng), 1.0, false);
  auto segs = level_flow_segments<double>(lp.p, lp.q, spec, 0.0, 0.0);
  CHECK(segs.empty());
}

TEST_CASE("segment cap reported as an error") {
  const auto& spec = b_spec();
  std::mt19937_64 rng(5);
  auto lp = project_to_level_set(spec.game, spec.eq, random_simplex(3, rng),
                                 random_simplex(3, rng), 1.0, false);
  CHECK_THROWS_AS(level_flow_segments<double>(lp.p, lp.q, spec, 0.0, 1000.0, 3), NumericError);
}

TEST_CASE("square game level flow closes in four segments") {
  auto spec = make_spec(GameMatrix<double>(Mat<double>::identity(2)),
                        DynamicsKind::BestResponse);
  std::vector<std::pair<size_t, size_t>> quad = {{0, 1}, {1, 1}, {1, 0}, {0, 0}};
  auto orb = periodic_orbit_solve(quad, spec, 0.5);
  REQUIRE(orb.has_value());
  CHECK(orb->closure_residual <= 1e-12);
  CHECK(orb->all_transversal);
  CHECK(orb->vertices.size() == 4);
  CHECK(orb->period_s > 0.0);
  // same in exact arithmetic, with an exactly closed cycle
  auto rspec = make_spec(GameMatrix<Rational>(Mat<Rational>::identity(2)),
                         DynamicsKind::BestResponse);
  auto rorb = periodic_orbit_solve(quad, rspec, Rational(1, 2));
  REQUIRE(rorb.has_value());
  CHECK(rorb->closure_residual == Rational(0));
  CHECK(to_double(rorb->period_s) == doctest::Approx(to_double(orb->period_s)));
}

TEST_CASE("hexagon orbit of the cyclic game") {
  const auto& spec = b_spec();
  auto orb = periodic_orbit_solve(kHex, spec, 1.0);
  REQUIRE(orb.has_value());
  CHECK(orb->closure_residual <= 1e-9);
  CHECK(orb->all_transversal);
  CHECK(orb->vertices.size() == 6);
  CHECK(orb->period_s == doctest::Approx(7.173364818).epsilon(1e-6));
  CHECK(orb->base_p[0] == doctest::Approx(0.396033855).epsilon(1e-6));
  CHECK(orb->base_p[1] == doctest::Approx(-0.096537195).epsilon(1e-6));
  CHECK(orb->base_p[2] == doctest::Approx(0.700503340).epsilon(1e-6));
  CHECK(orb->base_q[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("hexagon orbit in exact arithmetic") {
  auto spec = make_spec(cyclic_matrix<Rational>(Rational(618, 1000)),
                        DynamicsKind::BestResponse);
  auto orb = periodic_orbit_solve(kHex, spec, Rational(1));
  REQUIRE(orb.has_value());
  CHECK(orb->closure_residual == Rational(0));
  CHECK(orb->all_transversal);
  CHECK(orb->base_p[0] == Rational(1117981, 2822943));
  CHECK(orb->base_p[1] == Rational(-272519, 2822943));
  CHECK(orb->base_p[2] == Rational(1977481, 2822943));
  CHECK(to_double(orb->period_s) == doctest::Approx(7.173364818).epsilon(1e-6));
}

TEST_CASE("affine piece fixes the periodic base point") {
  auto spec = make_spec(cyclic_matrix<Rational>(Rational(618, 1000)),
                        DynamicsKind::BestResponse);
  auto orb = periodic_orbit_solve(kHex, spec, Rational(1));
  REQUIRE(orb.has_value());
  Hyperplane<Rational> entry = detail::between_cells(spec, kHex.back(), kHex.front());
  auto piece = affine_piece(kHex, entry, entry, spec);
  Vec<Rational> x = stack_state(orb->base_p, orb->base_q);
  Vec<Rational> fx = piece.eval(x);
  CHECK((fx - x).max_abs() == Rational(0));
}

TEST_CASE("affine pieces compose") {
  const auto& spec = b_spec();
  Hyperplane<double> entry = detail::between_cells(spec, kHex.back(), kHex.front());
  Hyperplane<double> mid = detail::between_cells(spec, kHex[2], kHex[3]);
  std::vector<std::pair<size_t, size_t>> first3(kHex.begin(), kHex.begin() + 3);
  std::vector<std::pair<size_t, size_t>> last3(kHex.begin() + 3, kHex.end());
  auto a = affine_piece(first3, entry, mid, spec);
  auto b = affine_piece(last3, mid, entry, spec);
  auto full = affine_piece(kHex, entry, entry, spec);
  Mat<double> comp = b.matrix.mul(a.matrix);
  CHECK((comp - full.matrix).max_abs() <= 1e-12);
  Vec<double> off = b.matrix.mul(a.offset) + b.offset;
  CHECK((off - full.offset).max_abs() <= 1e-12);

  // itinerary steps must switch exactly one support index
  std::vector<std::pair<size_t, size_t>> bad = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(affine_piece(bad, entry, entry, spec), NumericError);
}

TEST_CASE("first return to the entry plane of the hexagon") {
  const auto& spec = b_spec();
  auto orb = periodic_orbit_solve(kHex, spec, 1.0);
  REQUIRE(orb.has_value());
  Hyperplane<double> entry = detail::between_cells(spec, kHex.back(), kHex.front());
  // the tie hyperplane is global, so the cycle crosses it twice; the two
  // returns tile the period and close up at the base point
  auto res = first_return(entry, orb->base_p, orb->base_q, spec, 20.0);
  REQUIRE(res.found);
  auto [p1, q1] = unstack_state(res.point, 3);
  auto res2 = first_return(entry, p1, q1, spec, 20.0);
  REQUIRE(res2.found);
  CHECK(res.return_s + res2.return_s == doctest::Approx(orb->period_s).epsilon(1e-9));
  Vec<double> x = stack_state(orb->base_p, orb->base_q);
  CHECK((res2.point - x).max_abs() <= 1e-9);
  CHECK(res.itinerary.front() == kHex.front());
}

TEST_CASE("time-change conjugacy with the original flow") {
  // run both sides in extended precision: the stretch is chaotic and double
  // roundoff is amplified by orders of magnitude per time unit
  using T = BigFloat;
  GameMatrix<T> g = cyclic_matrix<T>(T(618) / T(1000));
  auto spec = make_spec(g, DynamicsKind::BestResponse);
  std::mt19937_64 rng(2026);
  auto rnd = [&](size_t n) {
    Vec<T> v(n);
    T s = 0;
    for (size_t i = 0; i < n; ++i) {
      v[i] = T(1 + static_cast<long>(rng() % 9973));
      s += v[i];
    }
    for (size_t i = 0; i < n; ++i) v[i] /= s;
    return v;
  };
  for (int trial = 0; trial < 3; ++trial) {
    Vec<T> p0 = rnd(3), q0 = rnd(3);
    T rho = hamiltonian_value(g, p0, q0) / T(2);
    auto lp = project_to_level_set(g, spec.eq, p0, q0, rho);
    for (double t : {1.0, 2.0}) {
      FlowState<T> st{lp.p, lp.q, 0.0};
      FlowState<T> end = flow<T>(st, spec, t,
                                 [](const SegmentRecord<T>&, const FlowState<T>&) {
                                   return true;
                                 });
      auto proj = project_to_level_set(g, spec.eq, end.p, end.q, rho, false);
      T sadv = exp(T(t)) - T(1);
      Vec<T> xs;
      level_flow<T>(lp.p, lp.q, spec, T(0), sadv,
                    [&](const TranslationSegment<T>& seg) {
                      if (seg.truncated) {
                        xs = seg.x_enter;
                        for (size_t k = 0; k < xs.size(); ++k)
                          xs[k] += (seg.s_exit - seg.s_enter) * seg.dir[k];
                      }
                      return true;
                    });
      auto [ps, qs] = unstack_state(xs, 3);
      double err = 0.0;
      for (int i = 0; i < 3; ++i) {
        err = std::max(err, std::fabs(to_double(ps[i] - proj.p[i])));
        err = std::max(err, std::fabs(to_double(qs[i] - proj.q[i])));
      }
      CHECK(err <= 1e-9);
    }
  }
}

TEST_CASE("cycle detection in cell sequences") {
  std::vector<std::pair<size_t, size_t>> cells = {{0, 0}, {1, 0}, {0, 1}, {1, 1},
                                                  {0, 1}, {1, 1}, {0, 1}, {1, 1}};
  auto cyc = detect_cycle(cells);
  REQUIRE(cyc.has_value());
  CHECK(*cyc == std::vector<std::pair<size_t, size_t>>{{0, 1}, {1, 1}});
  CHECK_FALSE(detect_cycle({{0, 0}, {1, 0}}).has_value());
  CHECK_FALSE(detect_cycle({{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 2}, {2, 1}}).has_value());
}
