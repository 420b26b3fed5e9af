#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace hardy {

// Thrown for any input outside the admissible parameter domain.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Problem parameters: dimension, potential strength and absorption power.
// The power is absent for purely linear computations.
struct Params {
  int N = 2;
  double kappa = 0.25;
  std::optional<double> q;

  double power() const;  // throws DomainError when q is absent
};

Params make_params(int N, double kappa, std::optional<double> q = std::nullopt);
void validate(const Params& p);

// kappa within 1e-12 of 1/4 is treated as the critical branch.
bool is_critical(double kappa);

struct Exponents {
  double alpha_plus = 0;   // larger root of a^2 - 2a + 4 kappa
  double alpha_minus = 0;  // smaller root
  double critical_q = 0;   // Dirac data solvable iff q below this
  double uniqueness_q = 0; // second threshold, below critical_q
  double first_eigenvalue = 0;   // spherical ground state
  double second_eigenvalue = 0;  // first axis-odd mode
  std::optional<double> separable_level;  // constant of the separable ansatz r^{-2/(q-1)}
  std::optional<double> trace_constant;   // flat-boundary blow-up constant

  // half of alpha_plus: boundary exponent of small solutions
  double boundary_exponent() const { return 0.5 * alpha_plus; }
};

Exponents derive_exponents(const Params& p);

// Normalized boundary weight: d^{alpha_-/2}, or sqrt(d)|ln(d/D0)| when critical.
double weight_W(const Params& p, double d, double D0);

// q < critical_q
bool subcritical(const Params& p);

// 2/(q-1)
double blowup_exponent(double q);

}  // namespace hardy
