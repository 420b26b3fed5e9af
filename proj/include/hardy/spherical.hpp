#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hardy/params.hpp"

namespace hardy {

// Uniform nodes on [eps_pole, pi/2 - eps_equator]; theta is the angle from the inward normal.
struct AzimuthalGrid {
  Eigen::VectorXd theta;
  double eps_pole = 1e-6;
  double eps_equator = 1e-6;

  Eigen::Index size() const { return theta.size(); }
  double spacing() const { return theta(1) - theta(0); }
};

AzimuthalGrid make_azimuthal_grid(int n, double eps_pole = 1e-6, double eps_equator = 1e-6);
void validate(const AzimuthalGrid& g);

enum class Verdict { Exists, Nonexistent, Inconclusive };
std::string to_string(Verdict v);

struct SphericalSolution {
  Params params;
  Eigen::VectorXd omega;    // samples on the grid
  double shoot_value = 0;   // omega at the pole
  double residual_norm = 0; // relative max residual on the interior window
  Verdict verdict = Verdict::Inconclusive;
  double ratio_min = 0;     // min omega/psi on the grid
  double epsilon_sub = 0;   // largest eps with omega >= eps psi and eps psi a subsolution
  int iterations = 0;
  std::vector<double> energy_history;  // variational solver only
  std::string message;
};

// Window of angles where finite-difference residuals are measured.
struct ResidualWindow {
  double lo = 0.0785398163397448;  // pi/40
  double hi = 1.33517687777566;    // 17pi/40
};

struct EigenCheck {
  Eigen::VectorXd psi;
  double eigenvalue = 0;
  double residual_norm = 0;
  double orthogonality = 0;  // second mode only
};

// cos(theta)^{alpha_+/2}
Eigen::VectorXd ground_state(const Params& p, const Eigen::VectorXd& theta);

EigenCheck first_eigen_check(const Params& p, const AzimuthalGrid& g, ResidualWindow w = {});
EigenCheck second_eigen_check(const Params& p, const AzimuthalGrid& g, ResidualWindow w = {});

struct ShootOptions {
  double tol = 1e-3;               // relative residual tolerance
  double initial_amplitude = 0;    // 0: start the bracket search from the linear estimate
  double amplitude_min = 1e-14;    // bracket search range, in units of the linear estimate
  double amplitude_max = 1e14;     // (mu_sep - mu_1)^{1/(q-1)}
  double divergence_ratio = 1e3;   // undershoot when omega/psi exceeds this multiple of omega(0)
  double ode_tol = 1e-12;
  int max_bisections = 200;
  ResidualWindow window{};
};

SphericalSolution solve_omega_shooting(const Params& p, const AzimuthalGrid& g, const ShootOptions& o = {});

struct VariationalOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-11;  // relative to the initial gradient scale
  double residual_tol = 1e-2;   // finite-difference residual of the minimizer, a different stencil
  ResidualWindow window{};
};

SphericalSolution solve_omega_variational(const Params& p, const AzimuthalGrid& g,
                                          const VariationalOptions& o = {});

// Discrete energy whose minimizer w gives omega = psi w.
double spherical_energy(const Params& p, const AzimuthalGrid& g, const Eigen::VectorXd& w);

// Relative max residual of the azimuthal equation for sampled omega on the window.
double azimuthal_residual(const Params& p, const AzimuthalGrid& g, const Eigen::VectorXd& omega,
                          ResidualWindow w = {});

// Max over the window of the nonlinear residual of eps psi (nonpositive for a subsolution).
double subsolution_residual(const Params& p, const AzimuthalGrid& g, double eps, ResidualWindow w = {});

// r^{-2/(q-1)} omega
Eigen::VectorXd separable_profile(const Params& p, const SphericalSolution& sol, double r);

// Max residual of the full polar operator applied to r^{-2/(q-1)} omega(theta),
// radial step equal to the angular spacing, sampled at radius r.
double separable_residual(const Params& p, const AzimuthalGrid& g, const SphericalSolution& sol,
                          double r = 1.0, ResidualWindow w = {});

}  // namespace hardy
