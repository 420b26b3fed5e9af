#include <random>

#include "doctest.h"
#include "hardy/admissibility.hpp"

using namespace hardy;
using doctest::Approx;

TEST_CASE("point admissibility examples") {
  CHECK(dirac_admissible(make_params(3, 0.25, 2.0)));
  CHECK_FALSE(dirac_admissible(make_params(3, 0.25, 3.0)));
  CHECK_THROWS_AS(dirac_admissible(make_params(3, 0.25)), DomainError);
}

TEST_CASE("capacity index at large q") {
  const auto p = make_params(3, 3.0 / 16, 1e9);
  const auto c = capacity_index(p);
  CHECK(c.q_prime == Approx(1.0).epsilon(1e-8));
  CHECK(c.s == Approx(1 - derive_exponents(p).alpha_plus / 2).epsilon(1e-8));
  CHECK(c.s <= 0.5);
  CHECK(c.dim == 2);
}

TEST_CASE("three predicates agree on random triples") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 7);
  std::uniform_real_distribution<double> kap(1e-6, 0.25), pw(1.001, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const auto p = make_params(dim(rng), kap(rng), pw(rng));
    const auto c = capacity_index(p);
    CHECK(dirac_admissible(p) == subcritical(p));
    CHECK(c.points_charged() == subcritical(p));
    CHECK((c.s * c.q_prime <= c.dim) == (*p.q >= derive_exponents(p).critical_q));
  }
}
