#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hardy/spherical.hpp"

using namespace hardy;
using doctest::Approx;
using std::numbers::pi;

TEST_CASE("ground state endpoints") {
  const auto p = make_params(3, 3.0 / 16);
  Eigen::VectorXd t(3);
  t << 0, pi / 4, pi / 2;
  const auto psi = ground_state(p, t);
  CHECK(psi(0) == 1.0);
  CHECK(psi(1) < 1.0);
  CHECK(std::abs(psi(2)) < 1e-12);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(make_azimuthal_grid(2), DomainError);
  CHECK_THROWS_AS(make_azimuthal_grid(64, -1e-6), DomainError);
}

TEST_CASE("linear spherical residuals are second order") {
  const auto p = make_params(3, 3.0 / 16);
  double prev1 = 0, prev2 = 0;
  for (int n : {513, 1025, 2049}) {
    const auto g = make_azimuthal_grid(n);
    const auto e1 = first_eigen_check(p, g);
    const auto e2 = second_eigen_check(p, g);
    if (prev1 > 0) {
      CHECK(prev1 / e1.residual_norm == Approx(4).epsilon(0.1));
      CHECK(prev2 / e2.residual_norm == Approx(4).epsilon(0.1));
    }
    CHECK(std::abs(e2.orthogonality) < 1e-10);
    prev1 = e1.residual_norm;
    prev2 = e2.residual_norm;
  }
}

TEST_CASE("nonlinear dichotomy examples") {
  const auto g = make_azimuthal_grid(512);
  const auto none = solve_omega_shooting(make_params(3, 0.25, 3.0), g);
  CHECK(none.verdict == Verdict::Nonexistent);
  const auto p = make_params(3, 0.25, 2.0);
  const auto sol = solve_omega_shooting(p, g);
  REQUIRE(sol.verdict == Verdict::Exists);
  CHECK(sol.omega.minCoeff() >= 0);
  CHECK(sol.omega(0) > 0);
  CHECK(sol.residual_norm <= 1e-3);
  CHECK(sol.epsilon_sub > 0);
  CHECK(sol.ratio_min >= sol.epsilon_sub);
  CHECK(subsolution_residual(p, g, sol.epsilon_sub) <= 0);
}

TEST_CASE("shooting is independent of the starting bracket") {
  const auto p = make_params(3, 0.125, 2.0);
  const auto g = make_azimuthal_grid(512);
  const double ref = solve_omega_shooting(p, g).shoot_value;
  for (double a0 : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
    ShootOptions o;
    o.initial_amplitude = a0;
    CHECK(std::abs(solve_omega_shooting(p, g, o).shoot_value - ref) <= 1e-8);
  }
}

TEST_CASE("verdict flips at the critical power") {
  const auto g = make_azimuthal_grid(256);
  for (double kappa : {0.125, 0.25}) {
    const double qc = derive_exponents(make_params(3, kappa)).critical_q;
    CHECK(solve_omega_shooting(make_params(3, kappa, qc - 2e-4), g).verdict == Verdict::Exists);
    CHECK(solve_omega_shooting(make_params(3, kappa, qc + 1e-4), g).verdict == Verdict::Nonexistent);
  }
}

TEST_CASE("shooting and variational profiles agree") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> kap(0.02, 0.25), frac(0.1, 0.9);
  const auto g = make_azimuthal_grid(512);
  for (int i = 0; i < 3; ++i) {
    const double kappa = kap(rng);
    const double qc = derive_exponents(make_params(3, kappa)).critical_q;
    const auto p = make_params(3, kappa, 1 + frac(rng) * (qc - 1));
    const auto a = solve_omega_shooting(p, g);
    const auto b = solve_omega_variational(p, g);
    REQUIRE(a.verdict == Verdict::Exists);
    REQUIRE(b.verdict == Verdict::Exists);
    CHECK((a.omega - b.omega).lpNorm<Eigen::Infinity>() / a.omega.lpNorm<Eigen::Infinity>() <= 1e-3);
  }
}

TEST_CASE("separable profile scaling") {
  const auto p = make_params(3, 0.25, 2.0);
  const auto g = make_azimuthal_grid(256);
  const auto sol = solve_omega_shooting(p, g);
  CHECK((separable_profile(p, sol, 1.0) - sol.omega).norm() == 0);
  CHECK((separable_profile(p, sol, 2.0) - sol.omega / 4).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("separable field residual under refinement") {
  const auto p = make_params(3, 0.125, 2.0);
  double prev = 0;
  for (int n : {257, 513, 1025}) {
    const auto g = make_azimuthal_grid(n);
    ShootOptions o;
    o.tol = 1e-6;
    const double r = separable_residual(p, g, solve_omega_shooting(p, g, o));
    if (prev > 0) CHECK(prev / r > 3);
    prev = r;
  }
}

TEST_CASE("powers close to one have very large profiles") {
  const auto p = make_params(5, 0.0707, 1.0878);
  const auto g = make_azimuthal_grid(512);
  const auto a = solve_omega_shooting(p, g);
  const auto b = solve_omega_variational(p, g);
  REQUIRE(a.verdict == Verdict::Exists);
  REQUIRE(b.verdict == Verdict::Exists);
  CHECK(a.shoot_value > 1e20);
  CHECK((a.omega - b.omega).lpNorm<Eigen::Infinity>() / a.omega.lpNorm<Eigen::Infinity>() <= 1e-3);
}
