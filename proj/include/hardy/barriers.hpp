#pragma once

#include <Eigen/Dense>
#include <array>

#include "hardy/params.hpp"

namespace hardy {

// Local supersolution Lambda (R^2 - |x-z|^2)^{-beta} d^gamma in the flat model d = x_N,
// or Lambda (R^2 - |x-z|^2)^{-beta} sqrt(d ln(S/d)) when kappa = 1/4.
struct BarrierSpec {
  Params params;
  double R = 1.0;
  double beta = 3.0;
  double gamma = 0.5;       // ignored in the critical branch
  double Lambda = 1.0;
  double log_scale = 0.0;   // S; 0 selects e R
  Eigen::VectorXd z;        // boundary point; empty means the origin

  double scale() const;
};

void validate(const BarrierSpec& s);  // throws DomainError on violated exponent constraints
double min_beta(const BarrierSpec& s);

double barrier_eval(const BarrierSpec& s, const Eigen::VectorXd& x);

// Pieces of the flat-model residual at tangential offset rho = |x' - z'| and height y:
// L f + f^q = Lambda * (linear + Lambda^{q-1} nonlinear).
struct ResidualParts {
  double linear = 0;
  double nonlinear = 0;
};
ResidualParts flat_residual_parts(const BarrierSpec& s, double rho, double y);
double flat_residual(const BarrierSpec& s, double rho, double y);

// Cell-centred n x n lattice over [0,R)^2 in (rho, y), restricted to rho^2 + y^2 < R^2.
struct FlatGrid {
  int n = 200;
};

struct ResidualReport {
  double min_residual = 0;      // min of L f + f^q
  double min_normalized = 0;    // min of linear + Lambda^{q-1} nonlinear
  double argmin_rho = 0, argmin_y = 0;  // location of the normalized minimum
  bool argmin_near_boundary = false;    // inside d <= eps0 (R^2 - r^2)/(16 beta R)
  int points = 0;
};

ResidualReport supersolution_residual(const BarrierSpec& s, const FlatGrid& g = {});

// R^{2 beta} and R^{2 beta - gamma - 1/(q-1)}; critical branch R^{2beta-2/(q-1)-1/2}, R^{3beta-2/(q-1)}.
std::array<double, 2> threshold_powers(const BarrierSpec& s);

struct ThresholdReport {
  double lambda_min = 0;   // smallest Lambda with nonnegative grid residual
  double threshold = 0;    // 2 lambda_min
  double constant = 0;     // threshold / max(threshold_powers)
};

ThresholdReport lambda_threshold(const BarrierSpec& s, const FlatGrid& g = {});

}  // namespace hardy
