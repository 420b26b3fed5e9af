#include "hardy/admissibility.hpp"

namespace hardy {

CapacityIndex capacity_index(const Params& p) {
  const double q = p.power();
  const auto e = derive_exponents(p);
  CapacityIndex c;
  c.q_prime = q / (q - 1.0);
  c.s = 2.0 - (2.0 + e.alpha_plus) / (2.0 * c.q_prime);
  c.dim = p.N - 1;
  return c;
}

bool dirac_admissible(const Params& p) { return subcritical(p); }

}  // namespace hardy
