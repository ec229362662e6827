#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "pwflow/geometry.hpp"

using namespace pwflow;

namespace {

Mat<double> random_matrix(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat<double> a(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) a(i, j) = u(rng);
  return a;
}

}  // namespace

TEST_CASE("projections for the identity form are centering maps") {
  SymplecticForm<double> form{Mat<double>::identity(3)};
  auto pp = build_projections(form);
  // P = I - J/3 on both sides
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j) {
      double expect = (i == j ? 1.0 : 0.0) - 1.0 / 3.0;
      CHECK(pp.p_p(i, j) == doctest::Approx(expect));
      CHECK(pp.p_q(i, j) == doctest::Approx(expect));
    }
  CHECK(pp.one_a_inv_one == doctest::Approx(3.0));
}

TEST_CASE("projection range and kernel") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mat<double> a = random_matrix(4, rng);
    if (std::fabs(determinant(a)) < 1e-3) continue;
    SymplecticForm<double> form{a};
    ProjectionPair<double> pp;
    try {
      pp = build_projections(form);
    } catch (const NumericError&) {
      continue;  // 1'A^-1 1 too close to zero for this draw
    }
    // idempotent
    CHECK((pp.p_p.mul(pp.p_p) - pp.p_p).max_abs() <= 1e-10);
    CHECK((pp.p_q.mul(pp.p_q) - pp.p_q).max_abs() <= 1e-10);
    // kernel directions are annihilated
    CHECK(pp.p_p.mul(pp.at_inv_one).max_abs() <= 1e-10);
    CHECK(pp.p_q.mul(pp.a_inv_one).max_abs() <= 1e-10);
    // the range lies in the sum-zero subspace
    Vec<double> v(4);
    for (int i = 0; i < 4; ++i) v[i] = 0.3 * i - 0.5;
    CHECK(std::fabs(pp.p_p.mul(v).sum()) <= 1e-10);
    CHECK(std::fabs(pp.p_q.mul(v).sum()) <= 1e-10);
  }
}

TEST_CASE("degenerate forms are rejected") {
  Mat<double> sing(2, 2);
  sing(0, 0) = 1; sing(0, 1) = 2;
  sing(1, 0) = 2; sing(1, 1) = 4;
  CHECK_THROWS_AS(build_projections(SymplecticForm<double>{sing}), NumericError);

  // invertible but 1'A^-1 1 = 0
  Mat<double> null_sum(2, 2);
  null_sum(0, 0) = 1; null_sum(1, 1) = -1;
  CHECK_THROWS_AS(build_projections(SymplecticForm<double>{null_sum}), NumericError);

  Mat<double> rect(2, 3);
  CHECK_THROWS_AS(build_projections(SymplecticForm<double>{rect}), DimensionError);
}

TEST_CASE("commutation identity") {
  CHECK(verify_symplectic_identity(SymplecticForm<double>{Mat<double>::identity(3)}) <= 1e-15);

  // exact arithmetic: identically zero for any invertible A
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Mat<Rational> a(3, 3);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j)
        a(i, j) = Rational(static_cast<long>(rng() % 19) - 9, 1 + static_cast<long>(rng() % 7));
    if (determinant(a) == Rational(0)) continue;
    try {
      CHECK(verify_symplectic_identity(SymplecticForm<Rational>{a}) == Rational(0));
    } catch (const NumericError&) {
      // 1'A^-1 1 = 0 for this draw
    }
  }

  for (int trial = 0; trial < 10; ++trial) {
    Mat<double> a = random_matrix(3, rng);
    if (std::fabs(determinant(a)) < 1e-2) continue;
    try {
      CHECK(verify_symplectic_identity(SymplecticForm<double>{a}) <= 1e-12);
    } catch (const NumericError&) {
    }
  }
}

TEST_CASE("vector field tangency and the A = M reduction") {
  auto g = cyclic_matrix<double>(0.618);
  auto eq = solve_nash(g);
  SymplecticForm<double> form{g.m};
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Vec<double> p(3), q(3);
    double sp = 0, sq = 0;
    for (int i = 0; i < 3; ++i) {
      p[i] = 0.05 + (rng() % 997) / 997.0;
      q[i] = 0.05 + (rng() % 997) / 997.0;
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < 3; ++i) { p[i] /= sp; q[i] /= sq; }
    auto field = hamiltonian_vector_field(g, form, p, q);
    REQUIRE(field.size() == 1);  // generic points have single-valued responses
    const auto& v = field.front();
    CHECK(std::fabs(v.vp.sum()) <= 1e-12);
    CHECK(std::fabs(v.vq.sum()) <= 1e-12);
    // with A = M the projected field collapses to the plain best-response field
    Vec<double> brp = unit<double>(3, v.i) - eq.p_bar;
    Vec<double> brq = unit<double>(3, v.j) - eq.q_bar;
    CHECK((v.vp - brp).max_abs() <= 1e-12);
    CHECK((v.vq - brq).max_abs() <= 1e-12);
  }

  // at a tie the field is set-valued: one pair per vertex combination
  auto id2 = GameMatrix<double>(Mat<double>::identity(2));
  auto field = hamiltonian_vector_field(id2, SymplecticForm<double>{id2.m},
                                        Vec<double>{0.4, 0.6}, Vec<double>{0.5, 0.5});
  CHECK(field.size() == 2);
}

TEST_CASE("radial projection onto a level set") {
  auto id2 = GameMatrix<double>(Mat<double>::identity(2));
  auto eq = solve_nash(id2);
  auto pt = project_to_level_set(id2, eq, Vec<double>{1, 0}, Vec<double>{1, 0}, 0.5);
  CHECK(pt.p[0] == doctest::Approx(0.75));
  CHECK(pt.p[1] == doctest::Approx(0.25));
  CHECK(pt.q[0] == doctest::Approx(0.75));
  CHECK(hamiltonian_value(id2, pt.p, pt.q) == doctest::Approx(0.5));

  // idempotent: a point already on the level set is fixed
  auto again = project_to_level_set(id2, eq, pt.p, pt.q, 0.5);
  CHECK((again.p - pt.p).max_abs() <= 1e-9);
  CHECK((again.q - pt.q).max_abs() <= 1e-9);

  CHECK_THROWS_AS(project_to_level_set(id2, eq, eq.p_bar, eq.q_bar, 0.5), NumericError);
  CHECK_THROWS_AS(project_to_level_set(id2, eq, Vec<double>{1, 0}, Vec<double>{1, 0}, -1.0),
                  NumericError);

  // large rho leaves the simplex pair; the affine-hull variant still solves it
  CHECK_THROWS_AS(project_to_level_set(id2, eq, Vec<double>{1, 0}, Vec<double>{1, 0}, 2.0),
                  NumericError);
  auto hull = project_to_level_set(id2, eq, Vec<double>{1, 0}, Vec<double>{1, 0}, 2.0, false);
  CHECK(hamiltonian_value(id2, hull.p, hull.q) == doctest::Approx(2.0));
  CHECK(hull.p[1] < 0.0);
  CHECK(hull.p.sum() == doctest::Approx(1.0));
}

TEST_CASE("gap grows monotonically along rays") {
  auto g = cyclic_matrix<double>(0.618);
  auto eq = solve_nash(g);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Vec<double> p(3), q(3);
    double sp = 0, sq = 0;
    for (int i = 0; i < 3; ++i) {
      p[i] = 0.05 + (rng() % 997) / 997.0;
      q[i] = 0.05 + (rng() % 997) / 997.0;
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < 3; ++i) { p[i] /= sp; q[i] /= sq; }
    double prev = 0.0;
    for (double c : {0.25, 0.5, 1.0}) {
      Vec<double> pc = eq.p_bar + c * (p - eq.p_bar);
      Vec<double> qc = eq.q_bar + c * (q - eq.q_bar);
      double h = hamiltonian_value(g, pc, qc);
      CHECK(h >= prev - 1e-14);
      prev = h;
    }
  }
}
