#pragma once

#include "hardy/params.hpp"

namespace hardy {

// Smoothness/integrability pair of the boundary Besov capacity.
struct CapacityIndex {
  double s = 0;        // 2 - (2 + alpha_+)/(2 q')
  double q_prime = 0;  // conjugate exponent
  int dim = 0;         // boundary dimension N-1

  // points have positive capacity iff s q' > dim
  bool points_charged() const { return s * q_prime > dim; }
};

CapacityIndex capacity_index(const Params& p);

// A Dirac mass on the boundary is admissible data iff q < critical_q.
bool dirac_admissible(const Params& p);

}  // namespace hardy
