#include <cmath>

#include "doctest.h"
#include "hardy/barriers.hpp"
#include "hardy/bvp.hpp"

using namespace hardy;
using doctest::Approx;

namespace {
const Params model = make_params(2, 0.25, 2.0);
}

TEST_CASE("polar mesh") {
  const auto m = make_polar_mesh(1e-3, 0.9, 33);
  CHECK(m.radii(0) == Approx(1e-3));
  CHECK(m.cols() == 33);
  CHECK(m.radii(m.rows() - 1) < 1.0);
  const auto f = refine(m);
  CHECK(f.cols() == 65);
  CHECK(f.ratio == Approx(std::sqrt(m.ratio)).epsilon(1e-3));  // snapped to the outer face
  const auto d = dilate(m, 2.0);
  CHECK(d.outer_radius == 2.0);
  CHECK((d.radii - 2 * m.radii).lpNorm<Eigen::Infinity>() <= 1e-15);
  CHECK_THROWS_AS(make_polar_mesh(1e-5), DomainError);
  CHECK_THROWS_AS(make_polar_mesh(1e-3, 0.99), DomainError);
}

TEST_CASE("zero data gives the zero solution") {
  const auto r = solve_dirac(model, make_polar_mesh(1e-3, 0.9, 33), 0.0);
  CHECK(r.field.values.cwiseAbs().maxCoeff() == 0);
  CHECK(r.report.converged);
}

TEST_CASE("refuses parameters without Dirac solutions") {
  const auto m = make_polar_mesh(1e-3, 0.9, 33);
  CHECK_THROWS_AS(solve_dirac(make_params(2, 0.25, 5.0), m, 1.0), DomainError);
  CHECK_THROWS_AS(solve_dirac(make_params(2, 0.25, 6.0), m, 1.0), DomainError);
  CHECK_NOTHROW(solve_dirac(make_params(2, 0.25, 4.9), m, 1.0));
  CHECK_THROWS_AS(solve_dirac(make_params(2, 0.25), m, 1.0), DomainError);
  CHECK_THROWS_AS(solve_dirac(model, m, -1.0), DomainError);
}

TEST_CASE("weak singularity") {
  const auto m = make_polar_mesh(1e-3, 0.9, 33);
  DiracOptions o;
  o.cross_validate = true;
  for (double k : {1.0, 4.0}) {
    const auto r = solve_dirac(model, m, k, o);
    CHECK(r.report.converged);
    CHECK(r.report.bracket_ok);
    CHECK(r.report.weak_ratio_min >= 0.97);
    CHECK(r.report.weak_ratio_max <= 1.01);
    CHECK(r.report.weak_ok());
    CHECK_FALSE(r.report.strong_ok());
    REQUIRE(r.report.cross_difference);
    CHECK(*r.report.cross_difference <= 1e-6);
    CHECK(r.field.values.minCoeff() >= 0);
  }
}

TEST_CASE("monotone iteration stays bracketed and agrees with Newton") {
  const auto m = make_polar_mesh(1e-3, 0.9, 33);
  DiracOptions o;
  o.method = Method::MonotoneTruncation;
  const auto a = solve_dirac(model, m, 4.0, o);
  const auto b = solve_dirac(model, m, 4.0);
  CHECK(a.report.bracket_ok);
  CHECK(a.report.converged);
  CHECK((a.field.values - b.field.values).lpNorm<Eigen::Infinity>() <=
        1e-6 * b.field.values.lpNorm<Eigen::Infinity>());
}

TEST_CASE("comparison principle") {
  const auto m = make_polar_mesh(1e-3, 0.9, 33);
  const auto u1 = solve_dirac(model, m, 1.0).field;
  const auto u2 = solve_dirac(model, m, 2.0).field;
  CHECK(comparison_check(u1, u1));
  CHECK(comparison_check(u1, u2));
  CHECK_FALSE(comparison_check(u2, u1));
  const auto other = solve_dirac(model, make_polar_mesh(1e-3, 0.9, 17), 1.0).field;
  CHECK_THROWS_AS(comparison_check(u1, other), DomainError);
}

TEST_CASE("discrete scaling covariance") {
  // v(y) = l^a u(l y) solves the problem on the mesh dilated by 1/l with data k l^{a-b}
  const auto m = make_polar_mesh(1e-3, 0.9, 33);
  const double l = 0.5, a = 2.0, b = 0.5, k = 3.0;
  const auto u = solve_dirac(model, m, k).field;
  const auto v = solve_dirac(model, dilate(m, 1 / l), k * std::pow(l, a - b)).field;
  CHECK((v.values - std::pow(l, a) * u.values).lpNorm<Eigen::Infinity>() <=
        1e-8 * v.values.lpNorm<Eigen::Infinity>());
}

TEST_CASE("strong singularity profile") {
  const auto r = solve_strong_singularity(model, make_polar_mesh(1e-4, 0.9, 33));
  CHECK(r.report.converged);
  REQUIRE(r.report.selected_k);
  REQUIRE(r.report.profile_distance);
  CHECK(*r.report.profile_distance <= 0.05);
  CHECK(r.report.strong_ok());
  CHECK_FALSE(r.report.weak_ok());
  for (const auto& s : r.report.profiles) {
    CHECK(s.scaled.minCoeff() > 0);
    CHECK(std::abs(s.edge_slope - 0.5) <= 0.05);
  }
  REQUIRE(r.report.lower_constant);
  CHECK(*r.report.lower_constant > 0);
  for (std::size_t i = 1; i < r.report.ladder_increments.size(); ++i) CHECK(r.report.ladder_increments[i] >= 0);
}

TEST_CASE("maximal solution trace, coarse") {
  MaximalOptions o;
  o.x_cells = 24;
  o.grading = 1.1;
  const auto r = solve_maximal(model, o);
  REQUIRE(r.levels.size() == 3);
  CHECK(r.levels[0].trace > r.levels[1].trace);
  CHECK(r.levels[1].trace > r.levels[2].trace);
  CHECK(r.relative_error <= 0.05);
  CHECK(r.target == 6.25);
  CHECK(r.field.values.minCoeff() > 0);
}

TEST_CASE("barrier dominates a Dirac solution away from its support") {
  const auto u = solve_dirac(model, make_polar_mesh(1e-3, 0.9, 65), 4.0).field;
  BarrierSpec s;
  s.params = model;
  s.R = 0.2;
  s.beta = 2.5;
  s.z = Eigen::Vector2d(0.5, 0.0);
  s.Lambda = lambda_threshold(s).threshold;
  int overlap = 0;
  for (Eigen::Index i = 0; i < u.values.size(); ++i) {
    const Eigen::Vector2d x(u.x(i), u.y(i));
    if ((x - s.z).norm() >= s.R || x(1) <= 0) continue;
    ++overlap;
    CHECK(u.values(i) <= barrier_eval(s, x));
  }
  CHECK(overlap > 50);
}
