#include "hardy/spherical.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace hardy {

namespace {

constexpr double half_pi = 0.5 * std::numbers::pi;

double signed_power(double x, double q) { return std::copysign(std::pow(std::abs(x), q), x); }

// sin^{N-2}
double surface_weight(int N, double theta) { return N == 2 ? 1.0 : std::pow(std::sin(theta), N - 2); }

// Conservative second-order stencil of sin^{2-N} (sin^{N-2} f')' at node i.
double spherical_laplacian(int N, const Eigen::VectorXd& th, const Eigen::VectorXd& f, Eigen::Index i) {
  const double hl = th(i) - th(i - 1), hr = th(i + 1) - th(i);
  const double sl = surface_weight(N, 0.5 * (th(i) + th(i - 1)));
  const double sr = surface_weight(N, 0.5 * (th(i) + th(i + 1)));
  const double flux = sr * (f(i + 1) - f(i)) / hr - sl * (f(i) - f(i - 1)) / hl;
  return flux / (0.5 * (hl + hr) * surface_weight(N, th(i)));
}

bool in_window(double t, const ResidualWindow& w) { return t >= w.lo && t <= w.hi; }

using State = std::array<double, 2>;

struct AzimuthalRhs {
  int N;
  double kappa, level, q;
  void operator()(const State& y, State& dy, double t) const {
    const double c = std::cos(t);
    const double drift = N == 2 ? 0.0 : (N - 2) * c / std::sin(t) * y[1];
    dy[0] = y[1];
    dy[1] = -drift - (level + kappa / (std::sin(half_pi - t) * std::sin(half_pi - t))) * y[0] +
            signed_power(y[0], q);
  }
};

enum class Outcome { Overshoot, Undershoot, Admissible };

struct ShotResult {
  Outcome outcome = Outcome::Admissible;
  std::vector<double> samples;  // filled up to the event
};

class Shooter {
 public:
  Shooter(const Params& p, const AzimuthalGrid& g, const ShootOptions& o)
      : p_(p), g_(g), o_(o), b_(derive_exponents(p).boundary_exponent()) {
    const auto e = derive_exponents(p);
    rhs_ = AzimuthalRhs{p.N, p.kappa, *e.separable_level, p.power()};
  }

  ShotResult shoot(double amplitude, bool sample) const {
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(o_.ode_tol, o_.ode_tol, ode::runge_kutta_dopri5<State>());

    const double t0 = g_.eps_pole;
    const double t_end = half_pi - g_.eps_equator;
    const double t_mid = half_pi - std::max(100.0 * g_.eps_equator, 1e-4);
    const double c = (std::pow(amplitude, p_.power() - 1.0) - rhs_.level - p_.kappa) / (2.0 * (p_.N - 1));
    State y{amplitude * (1.0 + c * t0 * t0), 2.0 * c * amplitude * t0};
    double t = t0;
    double dt = 1e-3;

    std::vector<double> stops;
    if (sample)
      for (Eigen::Index i = 0; i < g_.size(); ++i) stops.push_back(g_.theta(i));
    stops.push_back(t_mid);
    stops.push_back(t_end);
    std::sort(stops.begin(), stops.end());

    ShotResult r;
    double ratio_mid = 0;
    std::size_t next_sample = 0;
    for (double stop : stops) {
      while (t < stop) {
        double step = std::min({dt, stop - t, 0.5 * (half_pi - t)});
        if (stop - t - step < 1e-15) step = stop - t;
        const double t_before = t;
        if (stepper.try_step(rhs_, y, t, step) == ode::success) {
          dt = std::max(step, 1e-300);
          if (std::abs(stop - t) < 1e-14) t = stop;
        } else {
          dt = step;
          if (dt < 1e-16) {
            r.outcome = Outcome::Undershoot;
            return r;
          }
          t = t_before;
          continue;
        }
        if (!std::isfinite(y[0]) || y[0] > 1e150) {
          r.outcome = Outcome::Undershoot;
          return r;
        }
        if (y[0] < 0) {
          r.outcome = Outcome::Overshoot;
          return r;
        }
        if (y[0] / std::pow(std::sin(half_pi - t), b_) > o_.divergence_ratio * amplitude) {
          r.outcome = Outcome::Undershoot;
          return r;
        }
      }
      const double ratio = y[0] / std::pow(std::sin(half_pi - t), b_);
      if (sample && next_sample < static_cast<std::size_t>(g_.size()) && stop == g_.theta(next_sample)) {
        r.samples.push_back(y[0]);
        ++next_sample;
        while (next_sample < static_cast<std::size_t>(g_.size()) && g_.theta(next_sample) == stop) {
          r.samples.push_back(y[0]);
          ++next_sample;
        }
      }
      if (stop == t_mid) ratio_mid = ratio;
      if (stop == t_end) r.outcome = ratio > ratio_mid ? Outcome::Undershoot : Outcome::Overshoot;
    }
    return r;
  }

 private:
  Params p_;
  AzimuthalGrid g_;
  ShootOptions o_;
  double b_;
  AzimuthalRhs rhs_{};
};

SphericalSolution nonexistent(const Params& p, const AzimuthalGrid& g) {
  SphericalSolution s;
  s.params = p;
  s.omega = Eigen::VectorXd::Zero(g.size());
  s.verdict = Verdict::Nonexistent;
  s.message = "q >= critical exponent: no positive solution";
  return s;
}

void finish(SphericalSolution& s, const Params& p, const AzimuthalGrid& g, double tol, const ResidualWindow& w) {
  const Eigen::VectorXd psi = ground_state(p, g.theta);
  const auto e = derive_exponents(p);
  s.ratio_min = (s.omega.array() / psi.array()).minCoeff();
  const double sub_cap = std::pow(*e.separable_level - e.first_eigenvalue, 1.0 / (p.power() - 1.0));
  s.epsilon_sub = std::min(s.ratio_min, sub_cap);
  s.residual_norm = azimuthal_residual(p, g, s.omega, w);
  if (s.verdict != Verdict::Exists) return;
  if (!(s.omega.minCoeff() > 0.0) || !(s.ratio_min > 0.0)) {
    s.verdict = Verdict::Inconclusive;
    s.message = "profile not positive on the grid";
  } else if (!(s.residual_norm <= tol)) {
    s.verdict = Verdict::Inconclusive;
    s.message = "residual above tolerance";
  }
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Exists: return "Exists";
    case Verdict::Nonexistent: return "Nonexistent";
    default: return "Inconclusive";
  }
}

AzimuthalGrid make_azimuthal_grid(int n, double eps_pole, double eps_equator) {
  if (n < 8) throw DomainError("azimuthal grid needs at least 8 points");
  AzimuthalGrid g;
  g.eps_pole = eps_pole;
  g.eps_equator = eps_equator;
  g.theta = Eigen::VectorXd::LinSpaced(n, eps_pole, half_pi - eps_equator);
  validate(g);
  return g;
}

void validate(const AzimuthalGrid& g) {
  if (g.size() < 8) throw DomainError("azimuthal grid too small");
  if (!(g.theta(0) > 0.0) || !(g.theta(g.size() - 1) < half_pi))
    throw DomainError("azimuthal grid must lie inside (0, pi/2)");
  for (Eigen::Index i = 1; i < g.size(); ++i)
    if (!(g.theta(i) - g.theta(i - 1) > 1e-12)) throw DomainError("azimuthal grid not strictly increasing");
}

Eigen::VectorXd ground_state(const Params& p, const Eigen::VectorXd& theta) {
  const double b = derive_exponents(p).boundary_exponent();
  return theta.array().cos().pow(b);
}

EigenCheck first_eigen_check(const Params& p, const AzimuthalGrid& g, ResidualWindow w) {
  validate(g);
  EigenCheck c;
  c.psi = ground_state(p, g.theta);
  c.eigenvalue = derive_exponents(p).first_eigenvalue;
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) {
    const double t = g.theta(i);
    if (!in_window(t, w)) continue;
    const double cs = std::cos(t);
    const double r = -spherical_laplacian(p.N, g.theta, c.psi, i) - p.kappa / (cs * cs) * c.psi(i) -
                     c.eigenvalue * c.psi(i);
    c.residual_norm = std::max(c.residual_norm, std::abs(r));
  }
  return c;
}

EigenCheck second_eigen_check(const Params& p, const AzimuthalGrid& g, ResidualWindow w) {
  validate(g);
  EigenCheck c;
  const Eigen::VectorXd psi = ground_state(p, g.theta);
  c.psi = psi.array() * g.theta.array().sin();
  c.eigenvalue = derive_exponents(p).second_eigenvalue;
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) {
    const double t = g.theta(i);
    if (!in_window(t, w)) continue;
    const double cs = std::cos(t), sn = std::sin(t);
    const double r = -spherical_laplacian(p.N, g.theta, c.psi, i) + (p.N - 2) / (sn * sn) * c.psi(i) -
                     p.kappa / (cs * cs) * c.psi(i) - c.eigenvalue * c.psi(i);
    c.residual_norm = std::max(c.residual_norm, std::abs(r));
  }

  // Integral over the equatorial sphere S^{N-2} of the first coordinate, times the meridian integral.
  double tangential = 0;
  if (p.N == 2) {
    tangential = 1.0 + (-1.0);
  } else {
    const int m = 2001;
    const double h = std::numbers::pi / (m - 1);
    for (int k = 0; k < m; ++k) {
      const double s = k * h;
      const double wgt = (k == 0 || k == m - 1) ? 0.5 : 1.0;
      tangential += wgt * h * std::cos(s) * std::pow(std::sin(s), p.N - 3);
    }
  }
  double meridian = 0;
  for (Eigen::Index i = 0; i + 1 < g.size(); ++i) {
    const double h = g.theta(i + 1) - g.theta(i);
    auto f = [&](Eigen::Index k) { return c.psi(k) * psi(k) * surface_weight(p.N, g.theta(k)); };
    meridian += 0.5 * h * (f(i) + f(i + 1));
  }
  c.orthogonality = tangential * meridian;
  return c;
}

double azimuthal_residual(const Params& p, const AzimuthalGrid& g, const Eigen::VectorXd& omega,
                          ResidualWindow w) {
  const auto e = derive_exponents(p);
  const double q = p.power();
  const double scale = std::max(omega.cwiseAbs().maxCoeff(), 1e-300);
  double res = 0;
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) {
    const double t = g.theta(i);
    if (!in_window(t, w)) continue;
    const double cs = std::cos(t);
    const double r = spherical_laplacian(p.N, g.theta, omega, i) +
                     (*e.separable_level + p.kappa / (cs * cs)) * omega(i) - signed_power(omega(i), q);
    res = std::max(res, std::abs(r));
  }
  return res / scale;
}

double subsolution_residual(const Params& p, const AzimuthalGrid& g, double eps, ResidualWindow w) {
  const auto e = derive_exponents(p);
  const double q = p.power();
  const Eigen::VectorXd v = eps * ground_state(p, g.theta);
  double res = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) {
    const double t = g.theta(i);
    if (!in_window(t, w)) continue;
    const double cs = std::cos(t);
    const double r = -spherical_laplacian(p.N, g.theta, v, i) -
                     (*e.separable_level + p.kappa / (cs * cs)) * v(i) + signed_power(v(i), q);
    res = std::max(res, r);
  }
  return res;
}

SphericalSolution solve_omega_shooting(const Params& p, const AzimuthalGrid& g, const ShootOptions& o) {
  validate(g);
  if (!subcritical(p)) return nonexistent(p, g);
  const auto e = derive_exponents(p);
  const double q = p.power();
  const Shooter shooter(p, g, o);

  SphericalSolution s;
  s.params = p;
  s.omega = Eigen::VectorXd::Zero(g.size());

  const double scale = std::pow(*e.separable_level - e.first_eigenvalue, 1.0 / (q - 1.0));
  const double a_min = o.amplitude_min * scale, a_max = o.amplitude_max * scale;
  double a = std::clamp(o.initial_amplitude > 0 ? o.initial_amplitude : scale, a_min, a_max);
  double lo = 0, hi = 0;
  Outcome first = shooter.shoot(a, false).outcome;
  if (first == Outcome::Overshoot) {
    lo = a;
    while (true) {
      a *= 2.0;
      if (a > a_max) break;
      if (shooter.shoot(a, false).outcome == Outcome::Overshoot) lo = a;
      else { hi = a; break; }
    }
  } else {
    hi = a;
    while (true) {
      a *= 0.5;
      if (a < a_min) break;
      if (shooter.shoot(a, false).outcome == Outcome::Overshoot) { lo = a; break; }
      hi = a;
    }
  }
  if (!(lo > 0) || !(hi > 0)) {
    s.verdict = Verdict::Inconclusive;
    s.message = "no shooting bracket within the amplitude range";
    return s;
  }

  int it = 0;
  while (it < o.max_bisections && hi - lo > 4e-16 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (shooter.shoot(mid, false).outcome == Outcome::Overshoot ? lo : hi) = mid;
    ++it;
  }
  s.iterations = it;
  s.shoot_value = 0.5 * (lo + hi);

  const auto low = shooter.shoot(lo, true);
  const auto high = shooter.shoot(hi, true);
  const auto n = static_cast<std::size_t>(g.size());
  if (low.samples.size() == n && high.samples.size() == n) {
    for (std::size_t i = 0; i < n; ++i) s.omega(i) = 0.5 * (low.samples[i] + high.samples[i]);
  } else if (low.samples.size() == n || high.samples.size() == n) {
    const auto& src = low.samples.size() == n ? low.samples : high.samples;
    for (std::size_t i = 0; i < n; ++i) s.omega(i) = src[i];
  } else {
    s.verdict = Verdict::Inconclusive;
    s.message = "bracketing trajectories left the admissible region before the equator";
    return s;
  }
  s.verdict = Verdict::Exists;
  finish(s, p, g, o.tol, o.window);
  return s;
}

double spherical_energy(const Params& p, const AzimuthalGrid& g, const Eigen::VectorXd& w) {
  const auto e = derive_exponents(p);
  const double q = p.power();
  const Eigen::VectorXd psi = ground_state(p, g.theta);
  const Eigen::Index n = g.size();
  double J = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rho = psi(i) * psi(i) * surface_weight(p.N, g.theta(i));
    const double hl = i > 0 ? g.theta(i) - g.theta(i - 1) : 0.0;
    const double hr = i + 1 < n ? g.theta(i + 1) - g.theta(i) : 0.0;
    const double m = rho * 0.5 * (hl + hr);
    J += m * ((e.first_eigenvalue - *e.separable_level) * w(i) * w(i) +
              2.0 / (q + 1.0) * std::pow(psi(i), q - 1.0) * std::pow(std::abs(w(i)), q + 1.0));
    if (i + 1 < n) {
      const double rho_r = psi(i + 1) * psi(i + 1) * surface_weight(p.N, g.theta(i + 1));
      const double dw = w(i + 1) - w(i);
      J += 0.5 * (rho + rho_r) * dw * dw / hr;
    }
  }
  return J;
}

SphericalSolution solve_omega_variational(const Params& p, const AzimuthalGrid& g, const VariationalOptions& o) {
  validate(g);
  if (!subcritical(p)) return nonexistent(p, g);
  const auto e = derive_exponents(p);
  const double q = p.power();
  const double shift = e.first_eigenvalue - *e.separable_level;  // negative when subcritical
  const Eigen::VectorXd psi = ground_state(p, g.theta);
  const Eigen::Index n = g.size();

  Eigen::VectorXd mass(n), rho(n), stiff(n - 1), decay(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rho(i) = psi(i) * psi(i) * surface_weight(p.N, g.theta(i));
    decay(i) = std::pow(psi(i), q - 1.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hl = i > 0 ? g.theta(i) - g.theta(i - 1) : 0.0;
    const double hr = i + 1 < n ? g.theta(i + 1) - g.theta(i) : 0.0;
    mass(i) = rho(i) * 0.5 * (hl + hr);
    if (i + 1 < n) stiff(i) = 0.5 * (rho(i) + rho(i + 1)) / hr;
  }

  auto energy = [&](const Eigen::VectorXd& w) { return spherical_energy(p, g, w); };
  auto gradient = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd gr(n);
    for (Eigen::Index i = 0; i < n; ++i)
      gr(i) = 2.0 * mass(i) * (shift * w(i) + decay(i) * signed_power(w(i), q));
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const double f = 2.0 * stiff(i) * (w(i + 1) - w(i));
      gr(i) -= f;
      gr(i + 1) += f;
    }
    return gr;
  };
  auto assemble = [&](const Eigen::VectorXd& diag) {
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(i, i, diag(i));
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const double k = 2.0 * stiff(i);
      t.emplace_back(i, i, k);
      t.emplace_back(i + 1, i + 1, k);
      t.emplace_back(i, i + 1, -k);
      t.emplace_back(i + 1, i, -k);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(t.begin(), t.end());
    return A;
  };

  SphericalSolution s;
  s.params = p;

  // Leave the zero critical point along the constant (negative-curvature) direction.
  const double level = std::pow(-shift * mass.sum() / mass.dot(decay), 1.0 / (q - 1.0));
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, level);
  s.energy_history.push_back(0.0);
  double J = energy(w);
  s.energy_history.push_back(J);

  const Eigen::SparseMatrix<double> precond = assemble(2.0 * mass);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> precond_solver(precond);

  bool converged = false;
  int it = 0;
  for (; it < o.max_iterations; ++it) {
    const Eigen::VectorXd gr = gradient(w);
    Eigen::VectorXd hdiag(n);
    for (Eigen::Index i = 0; i < n; ++i)
      hdiag(i) = 2.0 * mass(i) * (shift + q * decay(i) * std::pow(std::abs(w(i)), q - 1.0));
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> newton(assemble(hdiag));
    Eigen::VectorXd d;
    bool newton_step = false;
    if (newton.info() == Eigen::Success && newton.vectorD().minCoeff() > 0.0) {
      d = -newton.solve(gr);
      newton_step = gr.dot(d) < 0.0;
    }
    if (!newton_step) d = -precond_solver.solve(gr);
    if (!(gr.dot(d) < 0.0)) {
      converged = true;
      break;
    }
    if (newton_step && d.cwiseAbs().maxCoeff() <= 1e-13 * w.cwiseAbs().maxCoeff()) {
      w += d;
      converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const Eigen::VectorXd trial = w + step * d;
      const double Jt = energy(trial);
      if (Jt <= J + 1e-4 * step * gr.dot(d) && Jt < J) {
        w = trial;
        J = Jt;
        s.energy_history.push_back(J);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = newton_step;
      break;
    }
  }
  s.iterations = it;
  s.omega = psi.array() * w.array();
  s.shoot_value = s.omega(0);
  if (!converged) {
    s.verdict = Verdict::Inconclusive;
    s.message = "variational iteration did not converge";
  } else {
    s.verdict = Verdict::Exists;
  }
  finish(s, p, g, o.residual_tol, o.window);
  return s;
}

Eigen::VectorXd separable_profile(const Params& p, const SphericalSolution& sol, double r) {
  if (sol.verdict != Verdict::Exists) throw DomainError("separable profile needs an existing solution");
  return std::pow(r, -blowup_exponent(p.power())) * sol.omega;
}

double separable_residual(const Params& p, const AzimuthalGrid& g, const SphericalSolution& sol, double r,
                          ResidualWindow w) {
  const double q = p.power();
  const double a = blowup_exponent(q);
  const double h = g.spacing();
  const double up = std::pow(r + h, -a), mid = std::pow(r, -a), down = std::pow(r - h, -a);
  const Eigen::VectorXd u = mid * sol.omega;
  double res = 0;
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) {
    const double t = g.theta(i);
    if (!in_window(t, w)) continue;
    const double om = sol.omega(i);
    const double urr = (up - 2.0 * mid + down) * om / (h * h);
    const double ur = (up - down) * om / (2.0 * h);
    const double cs = std::cos(t);
    const double lap_s = spherical_laplacian(p.N, g.theta, u, i);
    const double value = -urr - (p.N - 1) / r * ur - lap_s / (r * r) - p.kappa / (r * r * cs * cs) * u(i) +
                         signed_power(u(i), q);
    res = std::max(res, std::abs(value));
  }
  return res / std::max(u.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace hardy
