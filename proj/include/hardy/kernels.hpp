#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hardy/params.hpp"

namespace hardy {

struct KernelConfig {
  Params params;
  double normalization = 1.0;
  Eigen::VectorXd pole;  // boundary point, last coordinate 0; empty means the origin
};

KernelConfig make_kernel_config(const Params& p, double normalization = 1.0);
// Rescales so that the kernel equals 1 at x0.
KernelConfig normalized_at(KernelConfig cfg, const Eigen::VectorXd& x0);

// c x_N^{alpha_+/2} / |x - pole|^{N + alpha_+ - 2}
double poisson_kernel(const KernelConfig& cfg, const Eigen::VectorXd& x);

// Axis-aligned box in R^N with x_N > 0.
struct Box {
  Eigen::VectorXd lo, hi;
};

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

// Max over the box lattice (spacing h) of |-Delta_h f - kappa/x_N^2 f|.
double operator_residual(const Params& p, const Box& box, double h, const ScalarField& f);
double harmonicity_residual(const KernelConfig& cfg, const Box& box, double h);

struct RegressionFit {
  double slope = 0, intercept = 0, r2 = 0;
};
RegressionFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Log-log slope of lambda -> K(lambda x) over the given points and scale factors.
RegressionFit homogeneity_degree(const KernelConfig& cfg, const std::vector<Eigen::VectorXd>& points,
                                 const std::vector<double>& scales);

struct MonteCarloSpec {
  std::int64_t samples = 1'000'000;
  int strata = 36;
  double inner_radius = 1e-3;   // first stratum is the half-ball of this radius
  double outer_radius = 1.0;    // truncation radius
  std::uint64_t seed = 20240611;
  int jobs = 1;
};

struct DecayReport {
  std::vector<double> s, measure, ci;  // ci: 95% half-width
  double slope = 0;
  double target = 0;
  double max_relative_ci = 0;
  bool ci_ok = false;
  std::uint64_t seed = 0;
  std::int64_t samples = 0;
};

// Weighted measure of {K > s}, weight x_N^{alpha_+/2}, over the truncated half-ball.
DecayReport marcinkiewicz_decay(const KernelConfig& cfg, const std::vector<double>& s_values,
                                const MonteCarloSpec& mc = {});

double marcinkiewicz_slope(const Params& p);  // -(N + b)/(N - 2 + b)

enum class Finiteness { Finite, Divergent, Inconclusive };
std::string to_string(Finiteness f);

struct IntegrabilityReport {
  std::vector<double> radius;       // eps_j = 2^{-j}
  std::vector<double> cumulative;   // integral over eps_j < |x| < 1
  double fitted_exponent = 0;       // growth exponent of the shell increments
  double predicted_exponent = 0;    // N + b - q (N + b - 2)
  Finiteness verdict = Finiteness::Inconclusive;
};

// Verdict is Inconclusive only within margin/2 of critical_q (in q).
IntegrabilityReport kernel_Lq_integrability(const KernelConfig& cfg, double q, int levels = 14,
                                            double margin = 0.02);

// Surface measure of the unit sphere S^{n-1}.
double sphere_area(int n);

}  // namespace hardy
