#include <cmath>

#include "doctest.h"
#include "hardy/kernels.hpp"

using namespace hardy;
using doctest::Approx;

namespace {
Eigen::VectorXd point(std::initializer_list<double> xs) {
  Eigen::VectorXd v(xs.size());
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}
}  // namespace

TEST_CASE("kernel values") {
  CHECK(poisson_kernel(make_kernel_config(make_params(3, 0.1)), point({0, 0, 1})) == Approx(1).epsilon(1e-15));
  CHECK(poisson_kernel(make_kernel_config(make_params(3, 3.0 / 16)), point({0, 0, 2})) ==
        Approx(std::pow(2.0, -1.75)).epsilon(1e-14));
  CHECK_THROWS_AS(poisson_kernel(make_kernel_config(make_params(3, 0.1)), point({0, 0, -1})), DomainError);
  const auto x0 = point({0.2, -0.1, 0.7});
  const auto cfg = normalized_at(make_kernel_config(make_params(3, 0.2)), x0);
  CHECK(poisson_kernel(cfg, x0) == Approx(1).epsilon(1e-14));
}

TEST_CASE("homogeneity degree") {
  for (double kappa : {0.05, 0.1875, 0.25})
    for (int N : {2, 3, 4}) {
      const auto p = make_params(N, kappa);
      const auto cfg = make_kernel_config(p);
      Eigen::VectorXd a = Eigen::VectorXd::Constant(N, 0.3), b = Eigen::VectorXd::Constant(N, -0.4);
      a(N - 1) = 0.8;
      b(N - 1) = 0.2;
      const auto fit = homogeneity_degree(cfg, {a, b}, {0.25, 0.5, 1, 2, 4, 8});
      CHECK(std::abs(fit.slope - (2 - N - derive_exponents(p).boundary_exponent())) <= 1e-6);
      CHECK(fit.r2 > 0.9999);
    }
}

TEST_CASE("finite-difference residual is second order") {
  for (double kappa : {0.125, 0.25}) {
    const auto cfg = make_kernel_config(make_params(3, kappa));
    Box box{point({-0.5, -0.5, 0.5}), point({0.5, 0.5, 1.5})};
    const double r1 = harmonicity_residual(cfg, box, 0.05), r2 = harmonicity_residual(cfg, box, 0.025);
    CHECK(r1 / r2 == Approx(4).epsilon(0.1));
  }
}

TEST_CASE("two-sided envelope on the half-space") {
  // K(x) comparable to x_N^{b} |x|^{2-N-2b} with constants independent of the point
  const auto p = make_params(3, 0.2);
  const auto cfg = make_kernel_config(p);
  const double b = derive_exponents(p).boundary_exponent();
  double lo = INFINITY, hi = 0;
  for (double r : {1e-3, 1e-1, 1.0, 10.0})
    for (double t : {0.01, 0.3, 0.9, 1.5}) {
      const auto x = point({r * std::cos(t), 0, r * std::sin(t)});
      const double ratio = poisson_kernel(cfg, x) / (std::pow(x(2), b) * std::pow(r, 2 - 3 - 2 * b));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  CHECK(hi / lo == Approx(1).epsilon(1e-12));
}

TEST_CASE("level-set decay of the kernel") {
  const auto p = make_params(3, 0.125);
  MonteCarloSpec mc;
  mc.samples = 200'000;
  std::vector<double> s;
  for (int i = 0; i <= 8; ++i) s.push_back(std::pow(10.0, 1 + 0.25 * i));
  const auto r = marcinkiewicz_decay(make_kernel_config(p), s, mc);
  CHECK(r.target == Approx(marcinkiewicz_slope(p)));
  CHECK(std::abs(r.slope / r.target - 1) <= 0.05);
  for (std::size_t i = 1; i < r.measure.size(); ++i) CHECK(r.measure[i] <= r.measure[i - 1]);
  CHECK(r.seed == mc.seed);

  SUBCASE("reproducible across worker counts") {
    auto mc4 = mc;
    mc4.jobs = 4;
    const auto r4 = marcinkiewicz_decay(make_kernel_config(p), s, mc4);
    CHECK(r4.measure == r.measure);
  }
}

TEST_CASE("integrability verdicts") {
  const auto cfg = make_kernel_config(make_params(3, 0.25));
  CHECK(kernel_Lq_integrability(cfg, 2.0).verdict == Finiteness::Finite);
  CHECK(kernel_Lq_integrability(cfg, 3.0).verdict == Finiteness::Divergent);
  CHECK(kernel_Lq_integrability(cfg, 7.0 / 3).verdict == Finiteness::Inconclusive);
  CHECK(kernel_Lq_integrability(cfg, 7.0 / 3 - 0.02).verdict == Finiteness::Finite);
  CHECK(kernel_Lq_integrability(cfg, 7.0 / 3 + 0.02).verdict == Finiteness::Divergent);
  const auto r = kernel_Lq_integrability(cfg, 2.0);
  CHECK(r.fitted_exponent == Approx(r.predicted_exponent).epsilon(1e-3));
  CHECK(sphere_area(3) == Approx(4 * M_PI));
}
