#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pwflow/flow.hpp"

using namespace pwflow;

namespace {

template <class T>
GameMatrix<T> identity_game(size_t n) {
  return GameMatrix<T>(Mat<T>::identity(n));
}

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

GameMatrix<double> random_transversal_game(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Mat<double> m(3, 3);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) m(i, j) = u(rng);
    GameMatrix<double> g(m);
    auto rep = check_transversality(g);
    if (rep.assumption1_ok && rep.assumption2_ok) return g;
  }
}

}  // namespace

TEST_CASE("spec construction and validation") {
  auto g = cyclic_matrix<double>(0.618);
  auto spec = make_spec(g, DynamicsKind::BestResponse);
  CHECK(spec.alpha == 0.0);
  CHECK(spec.x(0, 0) == 1.0);
  CHECK(spec.target_p(0, 0) == 1.0);
  CHECK(spec.target_p(1, 0) == 0.0);

  auto ham = make_spec(g, DynamicsKind::Hamiltonian);
  CHECK(ham.alpha == 1.0);
  // M Y = X'M holds by construction
  Mat<double> lhs = g.m.mul(ham.y);
  Mat<double> rhs = ham.x.transposed().mul(g.m);
  CHECK((lhs - rhs).max_abs() <= 1e-12);

  // doubling X breaks the compatibility constraint
  Mat<double> x2 = Mat<double>::identity(3);
  for (size_t i = 0; i < 3; ++i) x2(i, i) = 2.0;
  CHECK_THROWS_AS(make_custom_spec(g, x2, Mat<double>::identity(3), 0.0),
                  SpecValidationError);
}

TEST_CASE("first event of the square game") {
  auto spec = make_spec(identity_game<double>(2), DynamicsKind::BestResponse);
  FlowState<double> st{{0.9, 0.1}, {0.9, 0.1}, 0.0};
  SegmentRecord<double> first;
  FlowState<double> after = flow<double>(st, spec, 10.0,
                                         [&](const SegmentRecord<double>& seg,
                                             const FlowState<double>&) {
                                           first = seg;
                                           return false;
                                         });
  // p chases e0 while q runs to the tie q0 = q1 at w = 5/9
  CHECK(first.t_exit == doctest::Approx(std::log(9.0 / 5.0)));
  CHECK(first.support_p == std::vector<size_t>{0});
  CHECK(first.support_q == std::vector<size_t>{1});
  CHECK(first.mode == SegmentMode::Transversal);
  CHECK(after.p[0] == doctest::Approx(17.0 / 18.0));
  CHECK(after.p[1] == doctest::Approx(1.0 / 18.0));
  CHECK(after.q[0] == doctest::Approx(0.5));
  CHECK(after.q[1] == doctest::Approx(0.5));
  // the gap contracts by exactly the segment factor
  double h = hamiltonian_value(spec.game, after.p, after.q);
  CHECK(h == doctest::Approx(0.8 * 5.0 / 9.0));
}

TEST_CASE("event times are exact in rational mode") {
  auto spec = make_spec(identity_game<Rational>(2), DynamicsKind::BestResponse);
  FlowState<Rational> st{{Rational(9, 10), Rational(1, 10)},
                         {Rational(9, 10), Rational(1, 10)},
                         0.0};
  FlowState<Rational> after = flow<Rational>(st, spec, 10.0,
                                             [](const SegmentRecord<Rational>&,
                                                const FlowState<Rational>&) { return false; });
  CHECK(after.p[0] == Rational(17, 18));
  CHECK(after.p[1] == Rational(1, 18));
  CHECK(after.q[0] == Rational(1, 2));
  CHECK(after.q[1] == Rational(1, 2));
}

TEST_CASE("event resolution at a simple tie") {
  auto spec = make_spec(identity_game<double>(2), DynamicsKind::BestResponse);
  // state reached at the first event above: q tied, p single-valued
  FlowState<double> st{{17.0 / 18.0, 1.0 / 18.0}, {0.5, 0.5}, 0.0};
  auto cont = resolve_event(st, spec);
  CHECK(cont.mode == SegmentMode::Transversal);
  CHECK_FALSE(cont.ambiguous);
  // q is heading toward e1, so row payoff 1 takes over at the tie
  CHECK(cont.ip == 1);
  CHECK(cont.jq == 1);
}

TEST_CASE("sliding target of the square game") {
  auto spec = make_spec(identity_game<Rational>(2), DynamicsKind::BestResponse);
  auto frame = sliding_target(spec, {0, 1}, {0, 1});
  CHECK(frame.a[0] == Rational(1, 2));
  CHECK(frame.a[1] == Rational(1, 2));
  CHECK(frame.b[0] == Rational(1, 2));
  CHECK(frame.b[1] == Rational(1, 2));
  // 2x2: the indifference sets are points, no tangent directions remain
  CHECK(frame.tilde_basis_p.empty());
  CHECK(frame.tilde_basis_q.empty());
  CHECK_THROWS_AS(sliding_target(spec, {0, 1}, {0}), NumericError);
}

TEST_CASE("flow is undefined at the equilibrium") {
  auto spec = make_spec(cyclic_matrix<double>(0.618), DynamicsKind::BestResponse);
  FlowState<double> st{spec.eq.p_bar, spec.eq.q_bar, 0.0};
  CHECK_THROWS_AS(flow<double>(st, spec, 1.0,
                               [](const SegmentRecord<double>&, const FlowState<double>&) {
                                 return true;
                               }),
                  NumericError);
}

TEST_CASE("exponential decay law over random games") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = random_transversal_game(rng);
    auto spec = make_spec(g, DynamicsKind::BestResponse);
    for (int s = 0; s < 3; ++s) {
      Vec<double> p0 = random_simplex(3, rng);
      Vec<double> q0 = random_simplex(3, rng);
      double h0 = hamiltonian_value(g, p0, q0);
      if (h0 <= 1e-6) continue;
      double worst = 0.0;
      FlowState<double> st{p0, q0, 0.0};
      flow<double>(st, spec, 10.0,
                   [&](const SegmentRecord<double>& seg, const FlowState<double>& state) {
                     double h = hamiltonian_value(g, state.p, state.q);
                     worst = std::max(worst, std::fabs(h - h0 * std::exp(-seg.t_exit)) / h0);
                     CHECK(is_simplex_point(state.p, 1e-9));
                     CHECK(is_simplex_point(state.q, 1e-9));
                     return true;
                   });
      CHECK(worst <= 1e-8);
    }
  }
}

TEST_CASE("segments tile the time interval") {
  auto spec = make_spec(cyclic_matrix<double>(0.618), DynamicsKind::BestResponse);
  std::mt19937_64 rng(13);
  FlowState<double> st{random_simplex(3, rng), random_simplex(3, rng), 0.0};
  auto traj = flow_trajectory(st, spec, 6.0);
  REQUIRE(!traj.empty());
  CHECK(traj.front().t_enter == doctest::Approx(0.0));
  for (size_t i = 0; i + 1 < traj.size(); ++i) {
    CHECK(traj[i].t_exit == doctest::Approx(traj[i + 1].t_enter));
    CHECK(traj[i].t_exit > traj[i].t_enter);
    CHECK_FALSE(traj[i].truncated);
  }
  CHECK(traj.back().truncated);
  CHECK(traj.back().t_exit == doctest::Approx(6.0));
}

TEST_CASE("fictitious-play reparametrization") {
  auto spec = make_spec(identity_game<double>(2), DynamicsKind::BestResponse);
  FlowState<double> st{{0.9, 0.1}, {0.9, 0.1}, 0.0};
  auto traj = flow_trajectory(st, spec, 0.5);  // before the first event
  REQUIRE(traj.size() == 1);
  CHECK(traj[0].truncated);
  auto fp = reparametrize_fictitious_play(traj);
  CHECK(fp[0].t_enter == doctest::Approx(1.0));
  CHECK(fp[0].t_exit == doctest::Approx(std::exp(0.5)));
}

TEST_CASE("segment cap guards runaway runs") {
  auto spec = make_spec(cyclic_matrix<double>(0.618), DynamicsKind::BestResponse);
  std::mt19937_64 rng(19);
  FlowState<double> st{random_simplex(3, rng), random_simplex(3, rng), 0.0};
  FlowOptions opt;
  opt.segment_cap = 2;
  CHECK_THROWS_AS(flow<double>(st, spec, 10.0,
                               [](const SegmentRecord<double>&, const FlowState<double>&) {
                                 return true;
                               },
                               opt),
                  NumericError);
}
