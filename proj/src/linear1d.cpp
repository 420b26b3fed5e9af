#include "hardy/linear1d.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace hardy {

namespace {

using Weight = std::function<double(double)>;
using Sparse = Eigen::SparseMatrix<double>;

// 12-point Gauss-Legendre on [0,1]
constexpr std::array<double, 12> gl_nodes{
    0.009219682876640378, 0.04794137181476255, 0.11504866290284765, 0.20634102285669126,
    0.31608425050090994,  0.43738329574426554, 0.5626167042557344,  0.6839157494990901,
    0.7936589771433087,   0.8849513370971523,  0.9520586281852375,  0.9907803171233596};
constexpr std::array<double, 12> gl_weights{
    0.02358766819325591, 0.05346966299765921, 0.08003916427167311, 0.10158371336153296,
    0.11674626826917740, 0.12457352290670139, 0.12457352290670139, 0.11674626826917740,
    0.10158371336153296, 0.08003916427167311, 0.05346966299765921, 0.02358766819325591};

double dist(double x) { return std::min(x, 1.0 - x); }

// Element integrals of rho * (phi_a^2, phi_a phi_b, phi_b^2) on [a,b].
// Elements touching an endpoint use x = a + (b-a) u^2 to absorb weak singularities.
std::array<double, 3> element_mass(const Weight& rho, double a, double b) {
  std::array<double, 3> m{0, 0, 0};
  const double h = b - a;
  const bool left_end = a == 0.0, right_end = b == 1.0;
  for (std::size_t k = 0; k < gl_nodes.size(); ++k) {
    double t = gl_nodes[k], jac = 1.0;
    if (left_end) {
      jac = 2.0 * t;
      t = t * t;
    } else if (right_end) {
      jac = 2.0 * t;
      t = 1.0 - t * t;
    }
    const double x = a + h * t;
    const double w = gl_weights[k] * jac * h * rho(x);
    m[0] += w * (1 - t) * (1 - t);
    m[1] += w * (1 - t) * t;
    m[2] += w * t * t;
  }
  return m;
}

double element_stiffness(const Weight& sigma, double a, double b) {
  const auto m = element_mass(sigma, a, b);
  return (m[0] + 2 * m[1] + m[2]) / ((b - a) * (b - a));
}

// Closure nodes 0, x_1..x_n, 1.
Eigen::VectorXd closure(const IntervalMesh& m) {
  Eigen::VectorXd X(m.size() + 2);
  X(0) = 0.0;
  X.segment(1, m.size()) = m.x;
  X(m.size() + 1) = 1.0;
  return X;
}

struct Assembled {
  Sparse stiffness, mass;
};

Assembled assemble(const Eigen::VectorXd& X, const Weight& sigma, const Weight& rho) {
  const Eigen::Index n = X.size();
  std::vector<Eigen::Triplet<double>> ks, ms;
  for (Eigen::Index e = 0; e + 1 < n; ++e) {
    const double a = X(e), b = X(e + 1);
    const double k = element_stiffness(sigma, a, b);
    const auto mm = element_mass(rho, a, b);
    ks.emplace_back(e, e, k);
    ks.emplace_back(e + 1, e + 1, k);
    ks.emplace_back(e, e + 1, -k);
    ks.emplace_back(e + 1, e, -k);
    ms.emplace_back(e, e, mm[0]);
    ms.emplace_back(e, e + 1, mm[1]);
    ms.emplace_back(e + 1, e, mm[1]);
    ms.emplace_back(e + 1, e + 1, mm[2]);
  }
  Assembled A{Sparse(n, n), Sparse(n, n)};
  A.stiffness.setFromTriplets(ks.begin(), ks.end());
  A.mass.setFromTriplets(ms.begin(), ms.end());
  return A;
}

Eigen::Index midpoint_index(const Eigen::VectorXd& X) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 0; i < X.size(); ++i)
    if (std::abs(X(i) - 0.5) < std::abs(X(best) - 0.5)) best = i;
  return best;
}

// u_tt - u_t + kappa u = 0 in t = ln d, one RK4 step of size h.
void euler_step(double kappa, double& u, double& ut, double h) {
  auto f = [kappa](double a, double b) { return std::array<double, 2>{b, b - kappa * a}; };
  const auto k1 = f(u, ut);
  const auto k2 = f(u + 0.5 * h * k1[0], ut + 0.5 * h * k1[1]);
  const auto k3 = f(u + 0.5 * h * k2[0], ut + 0.5 * h * k2[1]);
  const auto k4 = f(u + h * k3[0], ut + h * k3[1]);
  u += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
  ut += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
}

void march(double kappa, double& u, double& ut, double t_from, double t_to, int substeps) {
  const double h = (t_to - t_from) / substeps;
  for (int s = 0; s < substeps; ++s) euler_step(kappa, u, ut, h);
}

}  // namespace

IntervalMesh make_interval_mesh(double d_min, double ratio, double h_max) {
  if (!(d_min > 0 && d_min < 0.01)) throw DomainError("d_min must lie in (0, 0.01)");
  if (!(ratio > 0 && ratio < 1)) throw DomainError("grading ratio must lie in (0,1)");
  if (!(h_max > 0 && h_max <= 0.1)) throw DomainError("h_max must lie in (0, 0.1]");
  std::vector<double> half{d_min};
  while (true) {
    const double next = half.back() / ratio;
    if (next - half.back() > h_max || next >= 0.5) break;
    half.push_back(next);
  }
  const double start = half.back();
  const int steps = std::max(1, static_cast<int>(std::ceil((0.5 - start) / h_max)));
  for (int k = 1; k <= steps; ++k) half.push_back(start + (0.5 - start) * k / steps);
  half.back() = 0.5;

  const Eigen::Index nh = static_cast<Eigen::Index>(half.size());
  IntervalMesh m;
  m.x.resize(2 * nh - 1);
  for (Eigen::Index i = 0; i < nh; ++i) {
    m.x(i) = half[i];
    m.x(2 * nh - 2 - i) = 1.0 - half[i];
  }
  m.x(nh - 1) = 0.5;
  m.d = m.x.unaryExpr([](double v) { return dist(v); });
  m.ratio = ratio;
  m.d_min = d_min;
  m.h_max = h_max;
  validate(m);
  return m;
}

IntervalMesh make_uniform_interval_mesh(int n) {
  if (n < 3 || n % 2 == 0) throw DomainError("uniform interval mesh needs an odd node count >= 3");
  IntervalMesh m;
  m.x = Eigen::VectorXd::LinSpaced(n + 2, 0.0, 1.0).segment(1, n);
  m.d = m.x.unaryExpr([](double v) { return dist(v); });
  m.ratio = 1.0;
  m.d_min = m.x(0);
  m.h_max = m.x(1) - m.x(0);
  return m;
}

IntervalMesh refine(const IntervalMesh& m) { return make_interval_mesh(m.d_min, std::sqrt(m.ratio), 0.5 * m.h_max); }

double nodes_per_decade(const IntervalMesh& m) { return std::log(10.0) / std::log(1.0 / m.ratio); }

void validate(const IntervalMesh& m) {
  if (m.size() < 3) throw DomainError("interval mesh too small");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!(m.x(i) > 0 && m.x(i) < 1)) throw DomainError("interval nodes must lie in (0,1)");
    if (i > 0 && !(m.x(i) > m.x(i - 1))) throw DomainError("interval nodes must increase");
  }
  if (m.graded() && nodes_per_decade(m) < 8.0 - 1e-9)
    throw DomainError("graded mesh needs at least 8 nodes per decade");
}

HardyConstantReport hardy_constant_check(const IntervalMesh& m) {
  validate(m);
  const Eigen::VectorXd X = closure(m);
  const auto A = assemble(X, [](double) { return 1.0; }, [](double x) { return 1.0 / (dist(x) * dist(x)); });
  const Eigen::Index n = m.size();
  const Eigen::MatrixXd K = Eigen::MatrixXd(A.stiffness).block(1, 1, n, n);
  const Eigen::MatrixXd M = Eigen::MatrixXd(A.mass).block(1, 1, n, n);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M, Eigen::EigenvaluesOnly);
  HardyConstantReport r;
  r.value = es.eigenvalues().minCoeff();
  r.gap = r.value - 0.25;
  return r;
}

double rayleigh_quotient(const IntervalMesh& m, const Eigen::VectorXd& u) {
  if (u.size() != m.size()) throw DomainError("field length does not match mesh");
  const Eigen::VectorXd X = closure(m);
  const auto A = assemble(X, [](double) { return 1.0; }, [](double x) { return 1.0 / (dist(x) * dist(x)); });
  Eigen::VectorXd U = Eigen::VectorXd::Zero(X.size());
  U.segment(1, m.size()) = u;
  return U.dot(A.stiffness * U) / U.dot(A.mass * U);
}

EigenResult eigenpair(const Params& p, const IntervalMesh& m, int max_iterations, double tol) {
  validate(m);
  if (!m.graded()) throw DomainError("eigenpair needs a graded mesh");
  const double b = derive_exponents(Params{p.N, p.kappa, std::nullopt}).boundary_exponent();
  const Eigen::VectorXd X = closure(m);
  const Weight w2 = [b](double x) { return std::pow(dist(x), 2.0 * b); };
  auto A = assemble(X, w2, w2);
  // Kink of d at 1/2 contributes a point term 2b 2^{1-2b} v(1/2)^2.
  const Eigen::Index mid = midpoint_index(X);
  A.stiffness.coeffRef(mid, mid) += 2.0 * b * std::pow(2.0, 1.0 - 2.0 * b);

  Eigen::SimplicialLDLT<Sparse> solver(A.stiffness);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenpair: factorization failed");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(X.size());
  double lambda = v.dot(A.stiffness * v) / v.dot(A.mass * v);
  EigenResult r;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd y = solver.solve(A.mass * v);
    y /= y.cwiseAbs().maxCoeff();
    const double next = y.dot(A.stiffness * y) / y.dot(A.mass * y);
    v = y;
    r.iterations = it;
    const bool done = std::abs(next - lambda) <= tol * std::abs(next);
    lambda = next;
    if (done) break;
    if (it == max_iterations) throw std::runtime_error("eigenpair: inverse iteration did not converge");
  }
  if (v.sum() < 0) v = -v;
  r.lambda = lambda;
  r.phi.x = m.x;
  r.phi.values.resize(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) r.phi.values(i) = std::pow(m.d(i), b) * v(i + 1);
  r.phi.values /= r.phi.values.maxCoeff();
  return r;
}

double endpoint_log_slope(const Field1D& f, double lo, double hi) {
  std::vector<double> lx, ly;
  for (Eigen::Index i = 0; i < f.x.size(); ++i)
    if (f.x(i) >= lo && f.x(i) <= hi) {
      lx.push_back(std::log(f.x(i)));
      ly.push_back(std::log(f.values(i)));
    }
  const std::size_t n = lx.size();
  if (n < 2) throw DomainError("not enough nodes in the fitting window");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += lx[i] / n, my += ly[i] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
  return sxy / sxx;
}

HomogeneousPair homogeneous_solutions(const Params& p, const IntervalMesh& m, int substeps) {
  validate(m);
  const double b = derive_exponents(Params{p.N, p.kappa, std::nullopt}).boundary_exponent();
  const Eigen::Index n = m.size();
  // March from the first node toward the far end; returns values and d/dx at every node.
  auto sweep = [&](bool from_left) {
    Eigen::VectorXd val(n), der(n);
    auto node = [&](Eigen::Index k) { return from_left ? m.x(k) : 1.0 - m.x(n - 1 - k); };
    // position s measured from the starting end
    double s = node(0);
    double u = std::pow(s, b), ut = b * u;  // Frobenius start, t = ln s
    bool near_half = true;
    auto record = [&](Eigen::Index k, double ss) {
      const Eigen::Index idx = from_left ? k : n - 1 - k;
      val(idx) = u;
      const double ds = near_half ? ut / ss : -ut / (1.0 - ss);  // du/ds
      der(idx) = from_left ? ds : -ds;
    };
    record(0, s);
    for (Eigen::Index k = 1; k < n; ++k) {
      const double target = node(k);
      if (near_half) {
        const double stop = std::min(target, 0.5);
        march(p.kappa, u, ut, std::log(s), std::log(stop), substeps);
        s = stop;
        if (target > 0.5) {
          near_half = false;
          ut = -ut;  // t' = ln(1-s) reverses orientation
        }
      }
      if (!near_half) {
        march(p.kappa, u, ut, std::log(1.0 - s), std::log(1.0 - target), substeps);
        s = target;
      }
      s = target;
      record(k, s);
    }
    return std::pair{val, der};
  };
  const auto [lv, ld] = sweep(true);
  const auto [rv, rd] = sweep(false);
  HomogeneousPair h{lv, rv, 0.0};
  const Eigen::Index mid = (n - 1) / 2;
  h.wronskian = ld(mid) * rv(mid) - lv(mid) * rd(mid);
  if (!(std::abs(h.wronskian) > 1e-300)) throw std::runtime_error("homogeneous solutions are linearly dependent");
  return h;
}

double green_value(const HomogeneousPair& h, Eigen::Index i, Eigen::Index j) {
  const Eigen::Index lo = std::min(i, j), hi = std::max(i, j);
  return h.left(lo) * h.right(hi) / h.wronskian;
}

Field1D green_function(const Params& p, const IntervalMesh& m, Eigen::Index y) {
  if (y <= 0 || y >= m.size() - 1) throw DomainError("source node must be interior");
  const auto h = homogeneous_solutions(p, m);
  Field1D g{m.x, Eigen::VectorXd(m.size())};
  for (Eigen::Index i = 0; i < m.size(); ++i) g.values(i) = green_value(h, i, y);
  return g;
}

double green_envelope(const Params& p, double x, double y) {
  const double b = derive_exponents(Params{p.N, p.kappa, std::nullopt}).boundary_exponent();
  const double dx = dist(x), dy = dist(y);
  const double rho = std::max({std::abs(x - y), dx, dy});
  double e = std::pow(dx * dy, b) / std::pow(rho, 2.0 * b - 1.0);
  if (is_critical(p.kappa)) e *= 1.0 + std::log(1.0 / rho);
  return e;
}

double interval_weight(const Params& p, double d) { return weight_W(p, d, 1.0); }

DirichletResult dirichlet_W(const Params& p, const IntervalMesh& m, double h0, double h1) {
  validate(m);
  const Params lin{p.N, p.kappa, std::nullopt};
  const double b = derive_exponents(lin).boundary_exponent();
  const bool critical = is_critical(p.kappa);
  const Eigen::VectorXd X = closure(m);
  const Eigen::Index n = X.size();
  // Exact element conductances 1 / int W^{-2}: the transformed equation (W^2 v')' = 0 is then solved
  // exactly at the nodes, including the logarithmic approach to the boundary value when critical.
  const double root = 2.0 * b - 1.0;
  auto primitive = [&](double d) { return critical ? -1.0 / std::log(d) : std::pow(d, root) / root; };
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index e = 0; e + 1 < n; ++e) {
    const double a = X(e), c = X(e + 1);
    const double dlo = c <= 0.5 ? a : 1.0 - c, dhi = c <= 0.5 ? c : 1.0 - a;
    const double k = 1.0 / (primitive(dhi) - (dlo > 0 ? primitive(dlo) : 0.0));
    trip.emplace_back(e, e, k);
    trip.emplace_back(e + 1, e + 1, k);
    trip.emplace_back(e, e + 1, -k);
    trip.emplace_back(e + 1, e, -k);
  }
  Sparse K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  // W solves the homogeneous equation on each half; its kink at 1/2 leaves a point term 2 W W'(1/2-).
  const double slope = critical ? (std::log(2.0) - 2.0) / (2.0 * std::sqrt(0.5))
                                : (1.0 - b) * std::pow(0.5, -b);
  K.coeffRef(midpoint_index(X), midpoint_index(X)) += 2.0 * interval_weight(lin, 0.5) * slope;

  // Unknowns are the interior closure nodes; v(0), v(1) are prescribed.
  const Eigen::Index ni = n - 2;
  const Sparse Kii = K.block(1, 1, ni, ni);
  Eigen::SparseLU<Sparse> lu;
  lu.compute(Kii);
  if (lu.info() != Eigen::Success) throw std::runtime_error("dirichlet_W: factorization failed");
  auto solve = [&](double a0, double a1) {
    Eigen::VectorXd rhs = -(Eigen::VectorXd(K.block(1, 0, ni, 1) * Eigen::VectorXd::Constant(1, a0)) +
                            Eigen::VectorXd(K.block(1, n - 1, ni, 1) * Eigen::VectorXd::Constant(1, a1)));
    return Eigen::VectorXd(lu.solve(rhs));
  };
  Eigen::VectorXd Wn(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) Wn(i) = interval_weight(lin, m.d(i));

  DirichletResult r;
  const Eigen::VectorXd v0 = solve(1.0, 0.0), v1 = solve(0.0, 1.0);
  const Eigen::VectorXd v = solve(h0, h1);
  r.ratio = v;
  r.u = Field1D{m.x, Wn.cwiseProduct(v)};
  r.z0 = Field1D{m.x, Wn.cwiseProduct(v0)};
  r.z1 = Field1D{m.x, Wn.cwiseProduct(v1)};
  return r;
}

}  // namespace hardy
