#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hardy/params.hpp"

namespace hardy {

// Upper half-disk of radius outer_radius in the plane, polar nodes.
// theta is the angle from the flat boundary; cells are centred, the faces theta = 0, pi
// and r = outer_radius carry no flux. Radial nodes are r_in e^{i h}; row 0 holds the data.
struct PolarMesh {
  double r_in = 1e-4;
  double ratio = 0.9;        // r_i / r_{i+1} after snapping to the outer face
  double outer_radius = 1.0;
  Eigen::VectorXd radii;
  Eigen::VectorXd theta;

  double log_step() const { return -std::log(ratio); }
  double angle_step() const;
  Eigen::Index rows() const { return radii.size(); }
  Eigen::Index cols() const { return theta.size(); }
  Eigen::Index size() const { return rows() * cols(); }
  double distance(Eigen::Index i, Eigen::Index j) const;
  std::string descriptor() const;
};

PolarMesh make_polar_mesh(double r_in = 1e-4, double ratio = 0.9, int angles = 129, double outer_radius = 1.0);
PolarMesh refine(const PolarMesh& m);               // ratio -> sqrt(ratio), angles -> 2n - 1
PolarMesh dilate(const PolarMesh& m, double factor);  // every length times factor
void validate(const PolarMesh& m);

// Nodal values with node coordinates; meshes compare by coordinates.
struct Field2D {
  std::string mesh;
  Eigen::VectorXd x, y, d, values;
};

enum class Method { MonotoneTruncation, DampedNewton };
std::string to_string(Method m);

struct ProfileSample {
  double radius = 0;
  Eigen::VectorXd theta, scaled, reference;  // r^{2/(q-1)} u and the spherical profile
  double distance = NAN;                      // relative max norm on interior angles
  double edge_slope = NAN;                    // d ln(scaled) / d ln(sin theta) at the boundary
};

struct SolveReport {
  Params params;
  std::string mesh;
  Method method = Method::DampedNewton;
  double k = 0;
  int iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
  bool fallback = false;
  bool bracket_ok = true;
  std::optional<double> cross_difference;  // other method, max relative

  // weak limit on the probe ray theta = pi/2, r in [3 r_in, 10 r_in]; bounded ratio counts as finite
  std::optional<double> weak_limit;
  double weak_ratio_min = NAN, weak_ratio_max = NAN;
  std::vector<ProfileSample> profiles;
  std::optional<double> profile_distance;
  std::optional<double> apriori_constant;  // max u / (d^b |x|^{-2/(q-1)-b}), r >= 3 r_in
  std::optional<double> lower_constant;    // min over profile radii of r^{2/(q-1)} u(r e_N)

  std::vector<double> ladder, ladder_increments;
  std::vector<double> ladder_defects;           // A(far)/A(near) - 1, A = r^{2/(q-1)} u on the probe ray
  std::optional<double> selected_k;             // rung refined to a scale-invariant amplitude
  std::optional<double> top_rung_distance;      // profile distance of the highest rung
  std::vector<std::string> warnings;
  std::uint64_t config_hash = 0;

  bool weak_ok() const;
  bool strong_ok() const;
};

struct BvpResult {
  Field2D field;
  SolveReport report;
};

struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DiracOptions {
  Method method = Method::DampedNewton;
  double tol = 1e-10;
  int max_newton = 200;
  int max_monotone = 20000;
  bool cross_validate = false;
  std::vector<double> profile_radii = {1e-2, 3e-3, 1e-3};
};

// Boundary data k K on the inner arc, zero elsewhere. Refuses non-admissible parameters.
BvpResult solve_dirac(const Params& p, const PolarMesh& mesh, double k, const DiracOptions& o = {});

struct LadderOptions {
  std::vector<double> ladder;  // empty: 4^0 .. 4^16
  double tol = 1e-3;           // saturation of successive rungs, relative, r >= 10 r_in
  double near = 10;            // amplitude radii in units of r_in
  double far = 100;
  double defect_tol = 1e-6;
  DiracOptions dirac;
};

// Runs the ladder; the returned candidate is the Dirac solution, refined between the rungs
// where the probe amplitude r^{2/(q-1)} u changes from growing to decaying, whose amplitude
// agrees at near r_in and far r_in. Arc data of unbounded size converges to the solution
// blowing up on the whole inner arc, so the top rung is reported separately.
BvpResult solve_strong_singularity(const Params& p, const PolarMesh& mesh, const LadderOptions& o = {});

// Maximal solution approximated by data M on {d <= delta}, Cartesian grid graded off the flat boundary.
struct MaximalOptions {
  double readout = 0.02;          // layer D <= d <= 4D, |x| <= readout_halfwidth
  double readout_halfwidth = 0.2;
  std::vector<double> deltas;     // empty: D/8, D/16, D/32
  double data = 1e12;
  int x_cells = 48;
  double grading = 1.04;
  double first_step = 1e-4;       // relative to delta
  double tol = 1e-11;             // relative Newton step
  int max_iterations = 400;
};

struct TraceLevel {
  double delta = 0;
  double trace = 0;         // mean of d^{2/(q-1)} u over the layer
  double ko_constant = 0;   // max of (d - delta)^{2/(q-1)} u, |x|, y <= 1/2
  int iterations = 0;
  Eigen::Index unknowns = 0;
};

struct TraceReport {
  Params params;
  std::vector<TraceLevel> levels;
  double extrapolated = NAN;
  double target = NAN;
  double relative_error = NAN;
  double saturation = NAN;  // data M versus 2M on d >= 10 delta, |x|, y <= 1/2
  bool stable = false;
  std::vector<std::string> warnings;
  Field2D field;
};

TraceReport solve_maximal(const Params& p, const MaximalOptions& o = {});

// u1 <= u2 + tol (1 + |u2|) at every node.
bool comparison_check(const Field2D& u1, const Field2D& u2, double tol = 1e-9);

// Interpolated spherical profile at angles from the flat boundary, N = 2.
Eigen::VectorXd spherical_reference(const Params& p, const Eigen::VectorXd& theta);

std::uint64_t config_hash(const std::string& text);

}  // namespace hardy
