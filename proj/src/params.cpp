#include "hardy/params.hpp"

#include <cmath>

namespace hardy {

double Params::power() const {
  if (!q) throw DomainError("power q required for this computation");
  return *q;
}

bool is_critical(double kappa) { return std::abs(kappa - 0.25) <= 1e-12; }

void validate(const Params& p) {
  if (p.N < 2) throw DomainError("dimension N must be >= 2");
  if (!(p.kappa > 0.0) || !(p.kappa <= 0.25 + 1e-12) || !std::isfinite(p.kappa))
    throw DomainError("kappa must lie in (0, 1/4]");
  if (p.q && (!(*p.q > 1.0) || !std::isfinite(*p.q)))
    throw DomainError("q must be > 1");
}

Params make_params(int N, double kappa, std::optional<double> q) {
  Params p{N, kappa, q};
  validate(p);
  if (is_critical(kappa)) p.kappa = 0.25;
  return p;
}

double blowup_exponent(double q) { return 2.0 / (q - 1.0); }

Exponents derive_exponents(const Params& p) {
  validate(p);
  Exponents e;
  const double root = is_critical(p.kappa) ? 0.0 : std::sqrt(1.0 - 4.0 * p.kappa);
  e.alpha_plus = 1.0 + root;
  e.alpha_minus = 1.0 - root;

  const double N = p.N;
  const double b = 0.5 * e.alpha_plus;
  e.critical_q = (N + b) / (N + b - 2.0);
  e.uniqueness_q = (2.0 * N + 2.0 + e.alpha_plus) / (2.0 * N - 2.0 + e.alpha_plus);
  e.first_eigenvalue = b * (N + b - 2.0);
  e.second_eigenvalue = (b + 1.0) * (N + b - 1.0);

  if (p.q) {
    const double q = *p.q;
    const double a = blowup_exponent(q);
    e.separable_level = a * (a + 2.0 - N);
    e.trace_constant = std::pow(2.0 * (q + 1.0) / ((q - 1.0) * (q - 1.0)) + p.kappa, 1.0 / (q - 1.0));
  }
  return e;
}

double weight_W(const Params& p, double d, double D0) {
  if (!(d > 0.0)) throw DomainError("distance must be positive");
  if (is_critical(p.kappa)) {
    if (!(D0 > 0.0)) throw DomainError("scale D0 must be positive");
    return std::sqrt(d) * std::abs(std::log(d / D0));
  }
  const double am = derive_exponents(Params{p.N, p.kappa, std::nullopt}).alpha_minus;
  return std::pow(d, 0.5 * am);
}

bool subcritical(const Params& p) {
  return p.power() < derive_exponents(p).critical_q;
}

}  // namespace hardy
