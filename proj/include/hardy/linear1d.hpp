#pragma once

#include <Eigen/Dense>

#include "hardy/params.hpp"

namespace hardy {

// Interior nodes of (0,1), geometric toward both ends, uniform in the middle.
// x = 1/2 is always a node.
struct IntervalMesh {
  Eigen::VectorXd x;
  Eigen::VectorXd d;   // min(x, 1-x)
  double ratio = 0;    // geometric shrink factor toward the ends
  double d_min = 0;
  double h_max = 0;

  Eigen::Index size() const { return x.size(); }
  bool graded() const { return ratio > 0 && ratio < 1; }
};

IntervalMesh make_interval_mesh(double d_min = 1e-8, double ratio = 0.7498942093324559, double h_max = 0.02);
IntervalMesh make_uniform_interval_mesh(int n);
IntervalMesh refine(const IntervalMesh& m);  // ratio -> sqrt(ratio), h_max -> h_max/2
void validate(const IntervalMesh& m);
double nodes_per_decade(const IntervalMesh& m);

struct Field1D {
  Eigen::VectorXd x;       // node positions of the mesh it lives on
  Eigen::VectorXd values;
};

struct HardyConstantReport {
  double value = 0;  // smallest discrete Rayleigh quotient
  double gap = 0;    // value - 1/4
};

HardyConstantReport hardy_constant_check(const IntervalMesh& m);

// int |u'|^2 / int u^2/d^2 for the piecewise-linear interpolant vanishing at 0 and 1.
double rayleigh_quotient(const IntervalMesh& m, const Eigen::VectorXd& u);

struct EigenResult {
  double lambda = 0;
  Field1D phi;   // positive, max 1
  int iterations = 0;
};

EigenResult eigenpair(const Params& p, const IntervalMesh& m, int max_iterations = 500, double tol = 1e-14);

// Least-squares slope of log phi against log x over nodes in [lo, hi].
double endpoint_log_slope(const Field1D& f, double lo = 1e-5, double hi = 1e-3);

struct HomogeneousPair {
  Eigen::VectorXd left, right;          // values at nodes
  double wronskian = 0;                 // left' right - left right'
};

// Solutions vanishing like d^{alpha_+/2} at x=0 (left) and x=1 (right), marched node to node.
HomogeneousPair homogeneous_solutions(const Params& p, const IntervalMesh& m, int substeps = 16);

Field1D green_function(const Params& p, const IntervalMesh& m, Eigen::Index y);
double green_value(const HomogeneousPair& h, Eigen::Index i, Eigen::Index j);

// Comparison envelope d^b(x) d^b(y) / rho^{2b-1}, rho = max(|x-y|, d(x), d(y)),
// with an extra factor 1 + ln(1/rho) in the critical case.
double green_envelope(const Params& p, double x, double y);

struct DirichletResult {
  Field1D u;
  Eigen::VectorXd ratio;  // u / W at the nodes
  Field1D z0, z1;         // normalized solutions with data (1,0) and (0,1)
};

DirichletResult dirichlet_W(const Params& p, const IntervalMesh& m, double h0, double h1);

// Boundary weight on the unit interval (D0 = 1).
double interval_weight(const Params& p, double d);

}  // namespace hardy
