#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pwflow/model_map.hpp"

using namespace pwflow;

TEST_CASE("diamond rotation conserves the l1 norm exactly") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    Rational a(static_cast<long>(rng() % 19) - 9, 1 + static_cast<long>(rng() % 7));
    Rational b(static_cast<long>(rng() % 19) - 9, 1 + static_cast<long>(rng() % 7));
    if (a == 0 && b == 0) continue;
    auto z = make_l1_point(a, b);
    Rational theta(static_cast<long>(rng() % 31) - 15, 4);
    auto w = l1_rotate(z, theta);
    CHECK(w.norm1 == z.norm1);
    CHECK(scalar_traits<Rational>::abs(w.z[0]) + scalar_traits<Rational>::abs(w.z[1]) ==
          z.norm1);
  }
}

TEST_CASE("full turn and half turn are exact") {
  auto z = make_l1_point(Rational(3, 7), Rational(-2, 5));
  Rational pi = detail::pi_const<Rational>();
  auto full = l1_rotate(z, Rational(2) * pi);
  CHECK(full.z[0] == z.z[0]);
  CHECK(full.z[1] == z.z[1]);
  // half turn is the antipode
  auto half = l1_rotate(z, pi);
  CHECK(half.z[0] == -z.z[0]);
  CHECK(half.z[1] == -z.z[1]);
  // two quarter turns compose to the half turn
  auto q2 = l1_rotate(l1_rotate(z, pi / Rational(2)), pi / Rational(2));
  CHECK(q2.z[0] == half.z[0]);
  CHECK(q2.z[1] == half.z[1]);
  CHECK_THROWS_AS(l1_rotate(make_l1_point(Rational(0), Rational(0)), pi), NumericError);
}

TEST_CASE("rotation commutes with scaling") {
  auto z = make_l1_point(Rational(1, 3), Rational(1, 2));
  Rational theta(7, 5), c(9, 4);
  auto zs = make_l1_point(Rational(c * z.z[0]), Rational(c * z.z[1]));
  auto a = l1_rotate(zs, theta);
  auto b = l1_rotate(z, theta);
  CHECK(a.z[0] == c * b.z[0]);
  CHECK(a.z[1] == c * b.z[1]);
}

TEST_CASE("inverse round trip") {
  ModelMapSpec<double> spec;
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    double a = u(rng), b = u(rng);
    if (std::fabs(a) + std::fabs(b) < 1e-3) continue;
    auto z = make_l1_point(a, b);
    auto fz = model_map_step(z, spec);
    auto back = model_map_inverse(fz, spec);
    worst = std::max(worst, std::fabs(back.z[0] - z.z[0]) + std::fabs(back.z[1] - z.z[1]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("norm distortion and annulus locality") {
  ModelMapSpec<double> spec;
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    double a = u(rng), b = u(rng);
    if (std::fabs(a) + std::fabs(b) < 1e-3) continue;
    auto z = make_l1_point(a, b);
    auto fz = model_map_step(z, spec);
    double ratio = fz.norm1 / z.norm1;
    CHECK(ratio >= 0.5 - 1e-12);
    CHECK(ratio <= 2.0 + 1e-12);
    long jump = model_annulus_index(fz.norm1, 0.5) - model_annulus_index(z.norm1, 0.5);
    CHECK(std::labs(jump) <= 1);
  }
}

TEST_CASE("fixed point ladder on a ray") {
  ModelMapSpec<double> spec;
  auto fps = fixed_points_on_ray({2.0 / 3, 1.0 / 3}, 1e-3, 1.0, spec);
  CHECK(fps.size() == 159);
  REQUIRE(fps.size() >= 3);
  CHECK(fps[0].radius == doctest::Approx(0.146912255).epsilon(1e-6));
  for (const auto& f : fps) CHECK(f.residual <= 1e-10);
  for (size_t i = 0; i + 1 < fps.size(); ++i) CHECK(fps[i + 1].radius < fps[i].radius);
  // the radius ladder n = 2/(pi (shift + 4k)) interleaves two families
  CHECK(fps[1].radius / fps[0].radius == doctest::Approx(0.520000).epsilon(1e-4));
  CHECK(fps[2].radius / fps[1].radius == doctest::Approx(0.675676).epsilon(1e-4));

  CHECK_THROWS_AS(fixed_points_on_ray({1, 0}, 1.0, 0.5, spec), NumericError);
  CHECK_THROWS_AS(fixed_points_on_ray({0, 0}, 1e-3, 1.0, spec), NumericError);
}

TEST_CASE("itinerary depth along the forward orbit") {
  ModelMapSpec<double> spec;
  auto fps = fixed_points_on_ray({2.0 / 3, 1.0 / 3}, 1e-3, 1.0, spec);
  REQUIRE(!fps.empty());
  auto z = make_l1_point(fps[0].z[0], fps[0].z[1]);
  long n = model_annulus_index(z.norm1, 0.5);
  AnnulusItinerary t;
  t.ratio = 0.5;
  t.indices.assign(12, static_cast<int>(n));
  CHECK(model_itinerary_depth(z, t, 12, spec) == 12);
  t.indices[0] = static_cast<int>(n) + 1;
  CHECK(model_itinerary_depth(z, t, 12, spec) == 0);
}

TEST_CASE("refinement search input validation") {
  ModelMapSpec<double> spec;
  AnnulusItinerary t;
  t.ratio = 1.5;
  t.indices.assign(5, 2);
  CHECK_THROWS_AS(realize_model_itinerary(t, 5, spec), NumericError);
  t.ratio = 0.5;
  CHECK_THROWS_AS(realize_model_itinerary(t, 6, spec), NumericError);
  CHECK_THROWS_AS(realize_model_itinerary(t, 1, spec), NumericError);
  t.indices = {2, 4, 2, 2, 2};
  CHECK_THROWS_AS(realize_model_itinerary(t, 5, spec), NumericError);
}

TEST_CASE("witnesses at moderate depth in double precision") {
  ModelMapSpec<double> spec;
  AnnulusItinerary t;
  t.ratio = 0.5;
  t.indices.assign(10, 2);
  auto w = realize_model_itinerary(t, 10, spec);
  REQUIRE(w.found);
  CHECK(model_itinerary_depth(w.point, t, 10, spec) == 10);

  AnnulusItinerary alt;
  alt.ratio = 0.5;
  for (int i = 0; i < 6; ++i) alt.indices.push_back(2 + (i % 2));
  auto w2 = realize_model_itinerary(alt, 6, spec);
  REQUIRE(w2.found);
  CHECK(model_itinerary_depth(w2.point, alt, 6, spec) == 6);
}
