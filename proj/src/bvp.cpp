#include "hardy/bvp.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <numbers>
#include <sstream>

#include "hardy/admissibility.hpp"
#include "hardy/kernels.hpp"
#include "hardy/spherical.hpp"

namespace hardy {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Solver = Eigen::SimplicialLDLT<SpMat>;
constexpr double pi = std::numbers::pi;

void require_plane(const Params& p) {
  validate(p);
  if (p.N != 2) throw DomainError("the two-dimensional solver needs N = 2");
}

double power_abs(double u, double q) { return std::copysign(std::pow(std::abs(u), q), u); }

}  // namespace

// ---- mesh ---------------------------------------------------------------

double PolarMesh::angle_step() const { return pi / static_cast<double>(theta.size()); }

double PolarMesh::distance(Eigen::Index i, Eigen::Index j) const {
  return std::min(radii(i) * std::sin(theta(j)), outer_radius - radii(i));
}

std::string PolarMesh::descriptor() const {
  std::ostringstream s;
  s.precision(17);
  s << "polar r_in=" << r_in << " ratio=" << ratio << " R=" << outer_radius << " rows=" << rows()
    << " angles=" << cols();
  return s.str();
}

PolarMesh make_polar_mesh(double r_in, double ratio, int angles, double outer_radius) {
  if (!(outer_radius > 0) || !(r_in > 0) || !(r_in < outer_radius)) throw DomainError("need 0 < r_in < R");
  if (!(ratio > 0 && ratio < 1)) throw DomainError("radial ratio must lie in (0, 1)");
  if (angles < 3) throw DomainError("need at least 3 angular cells");
  const double span = std::log(outer_radius / r_in);
  const int cells = std::max(2, static_cast<int>(std::lround(span / -std::log(ratio) - 0.5)));
  const double h = span / (cells + 0.5);
  PolarMesh m;
  m.r_in = r_in;
  m.ratio = std::exp(-h);
  m.outer_radius = outer_radius;
  m.radii.resize(cells + 1);
  for (int i = 0; i <= cells; ++i) m.radii(i) = r_in * std::exp(i * h);
  m.theta.resize(angles);
  for (int j = 0; j < angles; ++j) m.theta(j) = (j + 0.5) * pi / angles;
  validate(m);
  return m;
}

PolarMesh refine(const PolarMesh& m) {
  return make_polar_mesh(m.r_in, std::sqrt(m.ratio), 2 * static_cast<int>(m.cols()) - 1, m.outer_radius);
}

PolarMesh dilate(const PolarMesh& m, double factor) {
  if (!(factor > 0)) throw DomainError("dilation factor must be positive");
  PolarMesh d = m;
  d.r_in *= factor;
  d.outer_radius *= factor;
  d.radii *= factor;
  validate(d);
  return d;
}

void validate(const PolarMesh& m) {
  if (!(m.ratio > 0.5 && m.ratio < 0.95)) throw DomainError("radial ratio outside (0.5, 0.95)");
  if (!(m.r_in >= 1e-4 * (1 - 1e-12))) throw DomainError("inner radius below 1e-4");
  if (m.radii.size() < 3 || m.theta.size() < 3) throw DomainError("mesh too small");
  for (Eigen::Index i = 1; i < m.radii.size(); ++i)
    if (!(m.radii(i) > m.radii(i - 1))) throw DomainError("radii must increase");
  if (!(m.radii(m.rows() - 1) < m.outer_radius)) throw DomainError("radii must stay inside the disk");
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (!(m.theta(j) > 0 && m.theta(j) < pi)) throw DomainError("angles must lie in (0, pi)");
}

std::string to_string(Method m) { return m == Method::DampedNewton ? "damped-newton" : "monotone-truncation"; }

bool SolveReport::weak_ok() const {
  if (!weak_limit || !(k > 0)) return false;
  return std::isfinite(*weak_limit) && weak_ratio_min > 0 && weak_ratio_max <= 1.25 * weak_ratio_min;
}

bool SolveReport::strong_ok() const { return profile_distance && *profile_distance <= 0.05; }

std::uint64_t config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool comparison_check(const Field2D& u1, const Field2D& u2, double tol) {
  if (u1.values.size() != u2.values.size() || u1.x.size() != u2.x.size() || u1.x != u2.x || u1.y != u2.y)
    throw DomainError("fields live on different meshes");
  for (Eigen::Index i = 0; i < u1.values.size(); ++i)
    if (u1.values(i) > u2.values(i) + tol * (1.0 + std::abs(u2.values(i)))) return false;
  return true;
}

Eigen::VectorXd spherical_reference(const Params& p, const Eigen::VectorXd& theta) {
  require_plane(p);
  const auto grid = make_azimuthal_grid(4097);
  const auto sol = solve_omega_shooting(p, grid);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(theta.size(), NAN);
  if (sol.verdict != Verdict::Exists) return out;
  const auto& t = grid.theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double phi = std::abs(0.5 * pi - theta(j));  // angle from the normal
    if (phi <= t(0)) {
      out(j) = sol.omega(0);
      continue;
    }
    if (phi >= t(t.size() - 1)) {
      out(j) = sol.omega(t.size() - 1);
      continue;
    }
    const auto k = std::upper_bound(t.data(), t.data() + t.size(), phi) - t.data();
    const double s = (phi - t(k - 1)) / (t(k) - t(k - 1));
    out(j) = (1 - s) * sol.omega(k - 1) + s * sol.omega(k);
  }
  return out;
}

// ---- polar finite volumes ----------------------------------------------
//
// u = w v with w = sin^b(theta) (R - r)^b. In s = ln r the energy is
//   sum_faces T (jump v)^2 + sum_nodes h dtheta [(r^2 P) w^2 v^2 + r^2 G(w v)]
// with r^2 P = b^2 + b r/(R-r) + kappa min(1/sin^2, r^2/(R-r)^2) >= b^2.

namespace {

struct PolarSystem {
  const PolarMesh* mesh = nullptr;
  double b = 0, q = 2;
  Eigen::Index M = 0, n = 0;  // angles, unknown rows
  Eigen::VectorXd w, mass, pot, inner;
  Eigen::VectorXd w_data;     // weight on the data row
  SpMat linear;               // flux part plus potential
  Solver linear_solver;

  Eigen::Index size() const { return M * n; }

  double weight(double r, double th) const {
    return std::pow(std::sin(th), b) * std::pow(mesh->outer_radius - r, b);
  }

  explicit PolarSystem(const Params& p, const PolarMesh& m) : mesh(&m) {
    const auto e = derive_exponents(p);
    b = e.boundary_exponent();
    q = p.q ? *p.q : 2.0;
    const double kappa = p.kappa, R = m.outer_radius;
    M = m.cols();
    n = m.rows() - 1;
    const double h = m.log_step(), dt = m.angle_step();
    w.resize(size());
    mass.resize(size());
    pot.resize(size());
    inner = Eigen::VectorXd::Zero(M);
    w_data.resize(M);
    for (Eigen::Index j = 0; j < M; ++j) w_data(j) = weight(m.radii(0), m.theta(j));

    std::vector<Triplet> trip;
    trip.reserve(5 * size());
    auto id = [&](Eigen::Index i, Eigen::Index j) { return (i - 1) * M + j; };
    for (Eigen::Index i = 1; i <= n; ++i) {
      const double r = m.radii(i);
      for (Eigen::Index j = 0; j < M; ++j) {
        const double th = m.theta(j), sn = std::sin(th);
        const auto k = id(i, j);
        w(k) = weight(r, th);
        mass(k) = h * dt * r * r;
        const double rp = b * b + b * r / (R - r) + kappa * std::min(1.0 / (sn * sn), r * r / ((R - r) * (R - r)));
        pot(k) = h * dt * rp * w(k) * w(k);
        trip.emplace_back(k, k, pot(k));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double rf = std::sqrt(m.radii(i) * m.radii(i + 1));
      for (Eigen::Index j = 0; j < M; ++j) {
        const double wf = weight(rf, m.theta(j));
        const double T = wf * wf * dt / h;
        if (i == 0) {
          inner(j) = T;
          trip.emplace_back(id(1, j), id(1, j), T);
        } else {
          const auto a = id(i, j), c = id(i + 1, j);
          trip.emplace_back(a, a, T);
          trip.emplace_back(c, c, T);
          trip.emplace_back(a, c, -T);
          trip.emplace_back(c, a, -T);
        }
      }
    }
    for (Eigen::Index i = 1; i <= n; ++i)
      for (Eigen::Index j = 0; j + 1 < M; ++j) {
        const double wf = weight(m.radii(i), 0.5 * (m.theta(j) + m.theta(j + 1)));
        const double T = wf * wf * h / dt;
        const auto a = id(i, j), c = id(i, j + 1);
        trip.emplace_back(a, a, T);
        trip.emplace_back(c, c, T);
        trip.emplace_back(a, c, -T);
        trip.emplace_back(c, a, -T);
      }
    linear.resize(size(), size());
    linear.setFromTriplets(trip.begin(), trip.end());
    linear.makeCompressed();
    linear_solver.compute(linear);
    if (linear_solver.info() != Eigen::Success) throw std::runtime_error("linear factorization failed");
  }

  Eigen::VectorXd rhs(const Eigen::VectorXd& data_v) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(size());
    f.head(M) = inner.cwiseProduct(data_v);
    return f;
  }

  // mass w g(w v)
  Eigen::VectorXd absorption(const Eigen::VectorXd& v) const {
    Eigen::VectorXd a(size());
    for (Eigen::Index k = 0; k < size(); ++k) a(k) = mass(k) * w(k) * power_abs(w(k) * v(k), q);
    return a;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& v, const Eigen::VectorXd& f) const {
    return linear * v + absorption(v) - f;
  }

  SpMat with_diagonal(const Eigen::VectorXd& extra) const {
    SpMat J = linear;
    for (Eigen::Index k = 0; k < size(); ++k) J.coeffRef(k, k) += extra(k);
    return J;
  }
};

struct PolarRun {
  Eigen::VectorXd v;
  int iterations = 0;
  std::vector<double> history;
  bool converged = false;
  bool bracket_ok = true;
};

PolarRun newton(const PolarSystem& S, const Eigen::VectorXd& f, Eigen::VectorXd v, double tol, int max_it) {
  PolarRun run;
  const double scale = f.norm();
  Eigen::VectorXd F = S.residual(v, f);
  Solver solver;
  bool analyzed = false;
  for (int it = 0; it <= max_it; ++it) {
    const double rel = F.norm() / scale;
    run.history.push_back(rel);
    if (rel <= tol) {
      run.converged = true;
      break;
    }
    if (it == max_it) break;
    Eigen::VectorXd extra(S.size());
    for (Eigen::Index k = 0; k < S.size(); ++k)
      extra(k) = S.mass(k) * S.w(k) * S.w(k) * S.q * std::pow(std::abs(S.w(k) * v(k)), S.q - 1.0);
    const SpMat J = S.with_diagonal(extra);
    if (!analyzed) {
      solver.analyzePattern(J);
      analyzed = true;
    }
    solver.factorize(J);
    if (solver.info() != Eigen::Success) break;
    const Eigen::VectorXd step = solver.solve(-F);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-10) {
      Eigen::VectorXd vt = v + t * step;
      Eigen::VectorXd Ft = S.residual(vt, f);
      if (Ft.norm() <= (1 - 1e-4 * t) * F.norm()) {
        v = std::move(vt);
        F = std::move(Ft);
        accepted = true;
        break;
      }
      if (t == 1.0 && (step.array().abs() / v.array().abs().max(1e-300)).maxCoeff() <= 1e-12) {
        v = std::move(vt);
        F = std::move(Ft);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++run.iterations;
    if (!accepted) break;
    if (t == 1.0 && (step.array().abs() / v.array().abs().max(1e-300)).maxCoeff() <= 1e-12) {
      run.history.push_back(F.norm() / scale);
      run.converged = true;
      break;
    }
  }
  run.v = std::move(v);
  return run;
}

// Ordered iteration from the supersolution with the nonlinearity capped at the supersolution level.
PolarRun monotone(const PolarSystem& S, const Eigen::VectorXd& f, const Eigen::VectorXd& sub,
                  const Eigen::VectorXd& super, double tol, int max_it) {
  PolarRun run;
  const double scale = f.norm();
  Eigen::VectorXd lam(S.size());
  double cap = 0;
  for (Eigen::Index k = 0; k < S.size(); ++k) {
    const double top = std::max(std::abs(sub(k)), std::abs(super(k))) * S.w(k);
    cap = std::max(cap, top);
    lam(k) = S.mass(k) * S.w(k) * S.w(k) * S.q * std::pow(top, S.q - 1.0);
  }
  const double capq = std::pow(cap, S.q);
  auto capped = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd a(S.size());
    for (Eigen::Index k = 0; k < S.size(); ++k) {
      const double u = S.w(k) * v(k);
      a(k) = S.mass(k) * S.w(k) * std::copysign(std::min(std::pow(std::abs(u), S.q), capq), u);
    }
    return a;
  };
  Solver solver(S.with_diagonal(lam));
  if (solver.info() != Eigen::Success) throw std::runtime_error("monotone factorization failed");
  Eigen::VectorXd v = super;
  const double slack = 1e-9 * super.cwiseProduct(S.w).lpNorm<Eigen::Infinity>();
  for (int it = 0; it <= max_it; ++it) {
    const double rel = S.residual(v, f).norm() / scale;
    run.history.push_back(rel);
    if (rel <= tol) {
      run.converged = true;
      break;
    }
    if (it == max_it) break;
    Eigen::VectorXd next = solver.solve(f + lam.cwiseProduct(v) - capped(v));
    ++run.iterations;
    for (Eigen::Index k = 0; k < S.size(); ++k) {
      const double u = next(k) * S.w(k);
      if (u < sub(k) * S.w(k) - slack || u > super(k) * S.w(k) + slack || next(k) > v(k) + slack / S.w(k))
        run.bracket_ok = false;
    }
    if ((next - v).lpNorm<Eigen::Infinity>() == 0.0) {
      v = std::move(next);
      run.converged = S.residual(v, f).norm() / scale <= 1e3 * tol;
      break;
    }
    v = std::move(next);
  }
  run.v = std::move(v);
  return run;
}

Field2D polar_field(const PolarMesh& m, const Eigen::VectorXd& u) {
  Field2D fld;
  fld.mesh = m.descriptor();
  const auto n = m.size();
  fld.x.resize(n);
  fld.y.resize(n);
  fld.d.resize(n);
  fld.values = u;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto k = i * m.cols() + j;
      fld.x(k) = m.radii(i) * std::cos(m.theta(j));
      fld.y(k) = m.radii(i) * std::sin(m.theta(j));
      fld.d(k) = m.distance(i, j);
    }
  return fld;
}

Eigen::VectorXd full_values(const PolarSystem& S, const Eigen::VectorXd& data_v, const Eigen::VectorXd& v) {
  Eigen::VectorXd u(S.M * (S.n + 1));
  u.head(S.M) = data_v.cwiseProduct(S.w_data);
  u.tail(S.size()) = v.cwiseProduct(S.w);
  return u;
}

double kernel_at(const KernelConfig& cfg, double r, double th) {
  Eigen::VectorXd x(2);
  x << r * std::cos(th), r * std::sin(th);
  return poisson_kernel(cfg, x);
}

// Probe ray, profiles, a priori constant.
void extract(const Params& p, const PolarMesh& m, const Eigen::VectorXd& u, const DiracOptions& o,
             SolveReport& rep) {
  const auto e = derive_exponents(p);
  const double a = blowup_exponent(p.power()), b = e.boundary_exponent();
  const auto M = m.cols();
  const auto cfg = make_kernel_config(p);
  auto at = [&](Eigen::Index i, Eigen::Index j) { return u(i * M + j); };
  auto probe = [&](Eigen::Index i) {
    if (M % 2) return at(i, M / 2);
    return 0.5 * (at(i, M / 2 - 1) + at(i, M / 2));
  };

  if (rep.k > 0) {
    double lo = INFINITY, hi = -INFINITY, sum = 0;
    int cnt = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double r = m.radii(i);
      if (r < 3 * m.r_in * (1 - 1e-9) || r > 10 * m.r_in * (1 + 1e-9)) continue;
      const double ratio = probe(i) / (rep.k * kernel_at(cfg, r, 0.5 * pi));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      sum += ratio;
      ++cnt;
    }
    if (cnt) {
      rep.weak_ratio_min = lo;
      rep.weak_ratio_max = hi;
      rep.weak_limit = rep.k * sum / cnt;
    }
  }

  double apriori = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m.radii(i) < 3 * m.r_in) continue;
    const double r = m.radii(i);
    for (Eigen::Index j = 0; j < M; ++j)
      apriori = std::max(apriori, at(i, j) / (std::pow(m.distance(i, j), b) * std::pow(r, -a - b)));
  }
  rep.apriori_constant = apriori;

  const Eigen::VectorXd ref = spherical_reference(p, m.theta);
  const double h = m.log_step();
  double worst = -1, lower = INFINITY;
  for (double rho : o.profile_radii) {
    if (rho < 3 * m.r_in || rho > m.radii(m.rows() - 1)) continue;
    const double s = std::log(rho / m.r_in) / h;
    const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(s), m.rows() - 2);
    const double t = s - i0;
    ProfileSample ps;
    ps.radius = rho;
    ps.theta = m.theta;
    ps.reference = ref;
    ps.scaled.resize(M);
    for (Eigen::Index j = 0; j < M; ++j) {
      const double f0 = std::pow(m.radii(i0), a) * at(i0, j), f1 = std::pow(m.radii(i0 + 1), a) * at(i0 + 1, j);
      ps.scaled(j) = (1 - t) * f0 + t * f1;
    }
    const double slope_lo = std::log(ps.scaled(1) / ps.scaled(0)) / std::log(std::sin(m.theta(1)) / std::sin(m.theta(0)));
    const double slope_hi =
        std::log(ps.scaled(M - 2) / ps.scaled(M - 1)) / std::log(std::sin(m.theta(M - 2)) / std::sin(m.theta(M - 1)));
    ps.edge_slope = 0.5 * (slope_lo + slope_hi);
    lower = std::min(lower, M % 2 ? ps.scaled(M / 2) : 0.5 * (ps.scaled(M / 2 - 1) + ps.scaled(M / 2)));
    if (ref.allFinite()) {
      double diff = 0, top = 0;
      for (Eigen::Index j = 0; j < M; ++j) {
        if (m.theta(j) < pi / 20 || m.theta(j) > 19 * pi / 20) continue;
        diff = std::max(diff, std::abs(ps.scaled(j) - ref(j)));
        top = std::max(top, ref(j));
      }
      ps.distance = diff / top;
      worst = std::max(worst, ps.distance);
    }
    rep.profiles.push_back(std::move(ps));
  }
  if (worst >= 0) rep.profile_distance = worst;
  if (std::isfinite(lower)) rep.lower_constant = lower;
}

BvpResult dirac_impl(const Params& p, const PolarMesh& m, const PolarSystem& S, double k, const DiracOptions& o,
                     const Eigen::VectorXd* warm) {
  BvpResult res;
  auto& rep = res.report;
  rep.params = p;
  rep.mesh = m.descriptor();
  rep.k = k;
  rep.method = o.method;
  {
    std::ostringstream s;
    s.precision(17);
    s << "dirac N=" << p.N << " kappa=" << p.kappa << " q=" << p.power() << " k=" << k << " " << rep.mesh
      << " method=" << to_string(o.method) << " tol=" << o.tol;
    rep.config_hash = config_hash(s.str());
  }
  const auto cfg = make_kernel_config(p);
  Eigen::VectorXd data_v(S.M);
  for (Eigen::Index j = 0; j < S.M; ++j) data_v(j) = k * kernel_at(cfg, m.radii(0), m.theta(j)) / S.w_data(j);

  if (k == 0) {
    res.field = polar_field(m, Eigen::VectorXd::Zero(m.size()));
    rep.converged = true;
    rep.residual_history = {0.0};
    extract(p, m, res.field.values, o, rep);
    return res;
  }

  const Eigen::VectorXd f = S.rhs(data_v);
  const Eigen::VectorXd super = S.linear_solver.solve(f);
  const Eigen::VectorXd sub = super - S.linear_solver.solve(S.absorption(super));

  auto run_method = [&](Method meth) {
    if (meth == Method::DampedNewton) return newton(S, f, warm ? *warm : super, o.tol, o.max_newton);
    return monotone(S, f, sub, super, o.tol, o.max_monotone);
  };

  PolarRun run = run_method(o.method);
  if (!run.converged && o.method == Method::DampedNewton) {
    rep.fallback = true;
    rep.method = Method::MonotoneTruncation;
    rep.warnings.push_back("newton did not converge; fell back to monotone iteration");
    run = run_method(Method::MonotoneTruncation);
  }
  rep.iterations = run.iterations;
  rep.residual_history = run.history;
  rep.converged = run.converged;
  rep.bracket_ok = run.bracket_ok;
  if (!run.converged) rep.warnings.push_back("nonlinear solve did not reach tolerance");

  const Eigen::VectorXd usol = run.v.cwiseProduct(S.w), usub = sub.cwiseProduct(S.w), usup = super.cwiseProduct(S.w);
  const double slack = 1e-8 * usup.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < S.size(); ++i)
    if (usol(i) < usub(i) - slack || usol(i) > usup(i) + slack)
      throw BracketError("solution escaped the sub/supersolution bracket; refine the mesh near the boundary");

  if (o.cross_validate) {
    const Method other = rep.method == Method::DampedNewton ? Method::MonotoneTruncation : Method::DampedNewton;
    const PolarRun alt = run_method(other);
    rep.cross_difference = (alt.v - run.v).cwiseProduct(S.w).lpNorm<Eigen::Infinity>() / usol.lpNorm<Eigen::Infinity>();
    if (other == Method::MonotoneTruncation) rep.bracket_ok = alt.bracket_ok;
  }

  res.field = polar_field(m, full_values(S, data_v, run.v));
  extract(p, m, res.field.values, o, rep);
  return res;
}

}  // namespace

BvpResult solve_dirac(const Params& p, const PolarMesh& mesh, double k, const DiracOptions& o) {
  require_plane(p);
  validate(mesh);
  if (!dirac_admissible(p)) throw DomainError("Dirac data is not admissible for q >= critical q");
  if (!(k >= 0)) throw DomainError("Dirac mass must be nonnegative");
  const PolarSystem S(p, mesh);
  return dirac_impl(p, mesh, S, k, o, nullptr);
}

namespace {

double probe_amplitude(const PolarMesh& m, const Eigen::VectorXd& u, double r, double a) {
  const auto M = m.cols();
  auto probe = [&](Eigen::Index i) {
    const double v = M % 2 ? u(i * M + M / 2) : 0.5 * (u(i * M + M / 2 - 1) + u(i * M + M / 2));
    return std::pow(m.radii(i), a) * v;
  };
  const double s = std::log(r / m.r_in) / m.log_step();
  const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(s), m.rows() - 2);
  const double t = s - i0;
  return (1 - t) * probe(i0) + t * probe(i0 + 1);
}

}  // namespace

BvpResult solve_strong_singularity(const Params& p, const PolarMesh& mesh, const LadderOptions& o) {
  require_plane(p);
  validate(mesh);
  if (!dirac_admissible(p)) throw DomainError("Dirac data is not admissible for q >= critical q");
  std::vector<double> ladder = o.ladder;
  if (ladder.empty())
    for (int i = 0; i <= 16; ++i) ladder.push_back(std::pow(4.0, i));
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (!(ladder[i] > 0) || (i && !(ladder[i] > ladder[i - 1]))) throw DomainError("ladder must increase");
  const double r_near = o.near * mesh.r_in, r_far = o.far * mesh.r_in;
  if (!(o.near >= 3 && r_far > 3 * r_near && r_far < mesh.radii(mesh.rows() - 1)))
    throw DomainError("amplitude radii do not fit the mesh");

  const double a = blowup_exponent(p.power());
  const PolarSystem S(p, mesh);
  auto defect = [&](const BvpResult& r) {
    return probe_amplitude(mesh, r.field.values, r_far, a) / probe_amplitude(mesh, r.field.values, r_near, a) - 1;
  };
  auto unknowns = [&](const BvpResult& r) { return Eigen::VectorXd(r.field.values.tail(S.size()).cwiseQuotient(S.w)); };

  std::vector<double> used, incs, defects;
  std::optional<BvpResult> below, above;
  BvpResult top;
  Eigen::VectorXd prev_v;
  int total = 0;
  bool saturated = false;
  for (double k : ladder) {
    BvpResult r = dirac_impl(p, mesh, S, k, o.dirac, prev_v.size() ? &prev_v : nullptr);
    total += r.report.iterations;
    used.push_back(k);
    defects.push_back(defect(r));
    if (prev_v.size()) {
      double inc = 0;
      for (Eigen::Index i = 0; i < mesh.rows(); ++i) {
        if (mesh.radii(i) < 10 * mesh.r_in) continue;
        for (Eigen::Index j = 0; j < mesh.cols(); ++j) {
          const auto idx = i * mesh.cols() + j;
          inc = std::max(inc, std::abs(r.field.values(idx) - top.field.values(idx)) / r.field.values(idx));
        }
      }
      incs.push_back(inc);
    }
    if (defects.back() > 0) below = r;
    else if (!above) above = r;
    prev_v = unknowns(r);
    top = std::move(r);
    if (!incs.empty() && incs.back() < o.tol) {
      saturated = true;
      break;
    }
  }

  BvpResult out;
  std::vector<std::string> notes;
  if (!saturated) notes.push_back("ladder not saturated at k_max");
  if (below && above) {
    double lo = std::log(below->report.k), hi = std::log(above->report.k);
    BvpResult best = *below;
    Eigen::VectorXd warm = unknowns(*below);
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      BvpResult r = dirac_impl(p, mesh, S, std::exp(mid), o.dirac, &warm);
      total += r.report.iterations;
      const double d = defect(r);
      if (d > 0) {
        lo = mid;
        warm = unknowns(r);
      } else {
        hi = mid;
      }
      best = std::move(r);
      if (std::abs(d) < o.defect_tol) break;
    }
    out = std::move(best);
    out.report.selected_k = out.report.k;
  } else {
    notes.push_back("no rung with scale-invariant amplitude; returning the top rung");
    out = top;
  }
  auto& rep = out.report;
  rep.ladder = used;
  rep.ladder_increments = incs;
  rep.ladder_defects = defects;
  rep.top_rung_distance = top.report.profile_distance;
  rep.iterations = total;
  rep.warnings.insert(rep.warnings.end(), notes.begin(), notes.end());
  std::ostringstream s;
  s.precision(17);
  s << "strong N=" << p.N << " kappa=" << p.kappa << " q=" << p.power() << " " << rep.mesh << " tol=" << o.tol
    << " kmax=" << ladder.back() << " near=" << o.near << " far=" << o.far;
  rep.config_hash = config_hash(s.str());
  return out;
}

// ---- maximal solution on a Cartesian grid -------------------------------

namespace {

struct CartesianRun {
  TraceLevel level;
  Field2D field;
};

std::vector<double> graded_heights(double delta, const MaximalOptions& o) {
  std::vector<double> y{delta};
  double t = o.first_step * delta, step = t;
  const double h_max = 0.02;
  while (y.back() < 1.0) {
    y.push_back(delta + t);
    step = std::min(step * o.grading, h_max);
    t += step;
  }
  return y;
}

CartesianRun maximal_level(const Params& p, double delta, double data, const MaximalOptions& o) {
  const double q = p.power(), kappa = p.kappa, a = blowup_exponent(q);
  const std::vector<double> y = graded_heights(delta, o);
  const int nx = o.x_cells;
  const double dx = 1.0 / nx;
  const auto ny = static_cast<Eigen::Index>(y.size());
  auto dist = [&](Eigen::Index i, Eigen::Index j) {
    const double x = i * dx;
    return std::min(y[j], 1.0 - std::hypot(x, y[j]));
  };
  // unknown numbering
  std::vector<Eigen::Index> id((nx + 1) * ny, -1);
  Eigen::Index n = 0;
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = 0; i <= nx; ++i)
      if (dist(i, j) > delta) id[j * (nx + 1) + i] = n++;

  std::vector<Triplet> trip;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n), mass(n), pot(n);
  auto couple = [&](Eigen::Index a, Eigen::Index c, double T) {
    if (a >= 0 && c >= 0) {
      trip.emplace_back(a, a, T);
      trip.emplace_back(c, c, T);
      trip.emplace_back(a, c, -T);
      trip.emplace_back(c, a, -T);
    } else if (a >= 0) {
      trip.emplace_back(a, a, T);
      f(a) += T * data;
    } else if (c >= 0) {
      trip.emplace_back(c, c, T);
      f(c) += T * data;
    }
  };
  auto width_x = [&](Eigen::Index i) { return i == 0 ? 0.5 * dx : dx; };
  auto width_y = [&](Eigen::Index j) {
    const double lo = j > 0 ? 0.5 * (y[j] + y[j - 1]) : y[j];
    const double hi = j + 1 < ny ? 0.5 * (y[j] + y[j + 1]) : y[j];
    return hi - lo;
  };
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = 0; i <= nx; ++i) {
      const auto k = id[j * (nx + 1) + i];
      if (k >= 0) {
        mass(k) = width_x(i) * width_y(j);
        const double d = dist(i, j);
        pot(k) = -kappa * mass(k) / (d * d);
        trip.emplace_back(k, k, pot(k));
      }
      if (i < nx) couple(k, id[j * (nx + 1) + i + 1], width_y(j) / dx);
      if (j + 1 < ny) couple(k, id[(j + 1) * (nx + 1) + i], width_x(i) / (y[j + 1] - y[j]));
    }
  SpMat L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  L.makeCompressed();

  auto residual = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd F = L * u - f;
    for (Eigen::Index k = 0; k < n; ++k) F(k) += mass(k) * power_abs(u(k), q);
    return F;
  };
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, data);
  Eigen::VectorXd F = residual(u);
  Solver solver;
  solver.analyzePattern(L);
  CartesianRun out;
  bool ok = false;
  for (int it = 0; it < o.max_iterations; ++it) {
    SpMat J = L;
    for (Eigen::Index k = 0; k < n; ++k) J.coeffRef(k, k) += mass(k) * q * std::pow(std::abs(u(k)), q - 1);
    solver.factorize(J);
    if (solver.info() != Eigen::Success) break;
    const Eigen::VectorXd step = solver.solve(-F);
    double t = 1;
    bool accepted = false;
    while (t > 1e-10) {
      Eigen::VectorXd ut = u + t * step;
      Eigen::VectorXd Ft = residual(ut);
      if (Ft.norm() <= (1 - 1e-4 * t) * F.norm() || t == 1.0) {
        u = std::move(ut);
        F = std::move(Ft);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++out.level.iterations;
    const double rel_step = (step.array().abs() / u.array().abs().max(1e-300)).maxCoeff();
    if (!accepted || rel_step <= o.tol) {
      ok = rel_step <= o.tol;
      break;
    }
  }
  if (!ok) throw std::runtime_error("maximal solve did not converge");

  out.level.delta = delta;
  out.level.unknowns = n;
  double sum = 0, ko = 0;
  int cnt = 0;
  Field2D& fld = out.field;
  std::ostringstream s;
  s.precision(17);
  s << "cartesian delta=" << delta << " nx=" << nx << " ny=" << ny;
  fld.mesh = s.str();
  fld.x.resize(n);
  fld.y.resize(n);
  fld.d.resize(n);
  fld.values = u;
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = 0; i <= nx; ++i) {
      const auto k = id[j * (nx + 1) + i];
      if (k < 0) continue;
      const double x = i * dx, d = dist(i, j);
      fld.x(k) = x;
      fld.y(k) = y[j];
      fld.d(k) = d;
      if (x <= o.readout_halfwidth + 1e-12 && y[j] >= o.readout && y[j] <= 4 * o.readout) {
        sum += std::pow(d, a) * u(k);
        ++cnt;
      }
      if (x <= 0.5 && y[j] <= 0.5) ko = std::max(ko, std::pow(d - delta, a) * u(k));
    }
  if (!cnt) throw std::runtime_error("readout layer holds no nodes");
  out.level.trace = sum / cnt;
  out.level.ko_constant = ko;
  return out;
}

}  // namespace

TraceReport solve_maximal(const Params& p, const MaximalOptions& o) {
  require_plane(p);
  const double q = p.power();
  if (!(o.readout > 0 && o.readout < 0.2)) throw DomainError("readout layer must lie in (0, 0.2)");
  if (!(o.grading > 1) || o.x_cells < 4) throw DomainError("invalid maximal mesh settings");
  std::vector<double> deltas = o.deltas;
  if (deltas.empty()) deltas = {o.readout / 8, o.readout / 16, o.readout / 32};
  for (double d : deltas)
    if (!(d > 0 && d < o.readout)) throw DomainError("delta must lie in (0, readout)");

  TraceReport rep;
  rep.params = p;
  rep.target = *derive_exponents(p).trace_constant;
  CartesianRun last;
  for (double d : deltas) {
    last = maximal_level(p, d, o.data, o);
    rep.levels.push_back(last.level);
  }
  {
    const CartesianRun twice = maximal_level(p, deltas.front(), 2 * o.data, o);
    const CartesianRun once = deltas.size() == 1 ? last : maximal_level(p, deltas.front(), o.data, o);
    double sat = 0;
    for (Eigen::Index k = 0; k < once.field.values.size(); ++k)
      if (once.field.d(k) >= 10 * deltas.front() && once.field.x(k) <= 0.5 && once.field.y(k) <= 0.5)
        sat = std::max(sat, std::abs(twice.field.values(k) - once.field.values(k)) / once.field.values(k));
    rep.saturation = sat;
    if (sat >= 0.01) rep.warnings.push_back("data level not saturated");
  }

  // fit trace = l + c1 delta + c2 delta^2 ... with as many terms as levels allow
  const auto m = static_cast<Eigen::Index>(deltas.size());
  Eigen::MatrixXd V(m, m);
  Eigen::VectorXd t(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    t(i) = rep.levels[i].trace;
    for (Eigen::Index c = 0; c < m; ++c) V(i, c) = std::pow(deltas[i] / o.readout, static_cast<double>(c));
  }
  rep.extrapolated = V.fullPivLu().solve(t)(0);
  double lower = t(m - 1);
  if (m >= 2) {
    Eigen::MatrixXd V2 = V.bottomRows(2).leftCols(2);
    lower = V2.fullPivLu().solve(t.tail(2).eval())(0);
  }
  rep.stable = std::abs(rep.extrapolated - lower) <= 0.01 * std::abs(rep.extrapolated);
  if (!rep.stable) rep.warnings.push_back("extrapolation unstable");
  rep.relative_error = std::abs(rep.extrapolated - rep.target) / rep.target;
  rep.field = std::move(last.field);
  (void)q;
  return rep;
}

}  // namespace hardy
