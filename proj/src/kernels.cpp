#include "hardy/kernels.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace hardy {

namespace {

Eigen::VectorXd pole_of(const KernelConfig& cfg) {
  return cfg.pole.size() ? cfg.pole : Eigen::VectorXd::Zero(cfg.params.N);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double sphere_area(int n) { return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n); }

KernelConfig make_kernel_config(const Params& p, double normalization) {
  validate(p);
  if (!(normalization > 0)) throw DomainError("kernel normalization must be positive");
  KernelConfig c;
  c.params = p;
  c.normalization = normalization;
  c.pole = Eigen::VectorXd::Zero(p.N);
  return c;
}

KernelConfig normalized_at(KernelConfig cfg, const Eigen::VectorXd& x0) {
  cfg.normalization = 1.0;
  cfg.normalization = 1.0 / poisson_kernel(cfg, x0);
  return cfg;
}

double poisson_kernel(const KernelConfig& cfg, const Eigen::VectorXd& x) {
  const int N = cfg.params.N;
  if (x.size() != N) throw DomainError("point dimension does not match N");
  if (!(x(N - 1) > 0)) throw DomainError("point must lie in the open half-space");
  const double r = (x - pole_of(cfg)).norm();
  if (!(r > 0)) throw DomainError("kernel is singular at its pole");
  const double ap = derive_exponents(cfg.params).alpha_plus;
  return cfg.normalization * std::pow(x(N - 1), 0.5 * ap) / std::pow(r, N + ap - 2.0);
}

double operator_residual(const Params& p, const Box& box, double h, const ScalarField& f) {
  const int N = p.N;
  if (box.lo.size() != N || box.hi.size() != N) throw DomainError("box dimension does not match N");
  if (!(box.lo(N - 1) - h > 0)) throw DomainError("box must stay inside the half-space");
  std::vector<int> count(N);
  for (int k = 0; k < N; ++k) count[k] = static_cast<int>(std::floor((box.hi(k) - box.lo(k)) / h + 1e-9)) + 1;
  std::vector<int> idx(N, 0);
  double res = 0;
  Eigen::VectorXd x(N);
  while (true) {
    for (int k = 0; k < N; ++k) x(k) = box.lo(k) + idx[k] * h;
    const double f0 = f(x);
    double lap = 0;
    for (int k = 0; k < N; ++k) {
      Eigen::VectorXd y = x;
      y(k) += h;
      const double fp = f(y);
      y(k) -= 2 * h;
      const double fm = f(y);
      lap += (fp - 2 * f0 + fm) / (h * h);
    }
    const double xn = x(N - 1);
    res = std::max(res, std::abs(-lap - p.kappa / (xn * xn) * f0));
    int k = 0;
    while (k < N && ++idx[k] == count[k]) idx[k++] = 0;
    if (k == N) break;
  }
  return res;
}

double harmonicity_residual(const KernelConfig& cfg, const Box& box, double h) {
  return operator_residual(cfg.params, box, h, [&](const Eigen::VectorXd& x) { return poisson_kernel(cfg, x); });
}

RegressionFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("regression needs at least two paired samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  RegressionFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

RegressionFit homogeneity_degree(const KernelConfig& cfg, const std::vector<Eigen::VectorXd>& points,
                                 const std::vector<double>& scales) {
  std::vector<double> lx, ly;
  const Eigen::VectorXd z = pole_of(cfg);
  for (const auto& x : points)
    for (double s : scales) {
      lx.push_back(std::log(s));
      ly.push_back(std::log(poisson_kernel(cfg, z + s * (x - z))) - std::log(poisson_kernel(cfg, x)));
    }
  return linear_fit(lx, ly);
}

double marcinkiewicz_slope(const Params& p) {
  const double b = derive_exponents(p).boundary_exponent();
  return -(p.N + b) / (p.N - 2.0 + b);
}

DecayReport marcinkiewicz_decay(const KernelConfig& cfg, const std::vector<double>& s_values,
                                const MonteCarloSpec& mc) {
  const int N = cfg.params.N;
  const double b = derive_exponents(cfg.params).boundary_exponent();
  if (s_values.size() < 2) throw DomainError("need at least two levels");
  if (mc.strata < 2 || mc.samples < mc.strata) throw DomainError("bad Monte Carlo stratification");
  const std::size_t ns = s_values.size();

  // Stratum 0 is the small half-ball, the rest are geometric shells up to outer_radius.
  std::vector<double> edge(mc.strata + 1);
  edge[0] = 0.0;
  for (int k = 1; k <= mc.strata; ++k)
    edge[k] = mc.inner_radius * std::pow(mc.outer_radius / mc.inner_radius, double(k - 1) / (mc.strata - 1));
  const std::int64_t per = mc.samples / mc.strata;
  const double half_sphere = 0.5 * sphere_area(N);
  const Eigen::VectorXd z = pole_of(cfg);

  struct StratumSum {
    std::vector<double> mean, var;
  };
  std::vector<StratumSum> result(mc.strata);
  auto run = [&](int k) {
    std::mt19937_64 rng(splitmix(mc.seed ^ splitmix(static_cast<std::uint64_t>(k) + 1)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double a = std::pow(edge[k], N), c = std::pow(edge[k + 1], N);
    std::vector<double> sum(ns, 0.0), sum2(ns, 0.0);
    Eigen::VectorXd dir(N), x(N);
    for (std::int64_t i = 0; i < per; ++i) {
      for (int j = 0; j < N; ++j) dir(j) = gauss(rng);
      dir /= dir.norm();
      dir(N - 1) = std::abs(dir(N - 1));
      const double r = std::pow(a + uni(rng) * (c - a), 1.0 / N);
      if (!(dir(N - 1) > 0)) continue;
      x = z + r * dir;
      const double kval = poisson_kernel(cfg, x);
      const double w = std::pow(x(N - 1), b);
      for (std::size_t m = 0; m < ns; ++m)
        if (kval > s_values[m]) sum[m] += w, sum2[m] += w * w;
    }
    StratumSum out{std::vector<double>(ns), std::vector<double>(ns)};
    const double vol = half_sphere * (c - a) / N;
    for (std::size_t m = 0; m < ns; ++m) {
      const double mean = sum[m] / per;
      const double var = std::max(0.0, sum2[m] / per - mean * mean);
      out.mean[m] = vol * mean;
      out.var[m] = vol * vol * var / per;
    }
    result[k] = std::move(out);
  };

  const int jobs = std::max(1, mc.jobs);
  if (jobs == 1) {
    for (int k = 0; k < mc.strata; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&, t] {
        for (int k = t; k < mc.strata; k += jobs) run(k);
      });
    for (auto& th : pool) th.join();
  }

  DecayReport rep;
  rep.seed = mc.seed;
  rep.samples = per * mc.strata;
  rep.target = marcinkiewicz_slope(cfg.params);
  std::vector<double> lx, ly;
  for (std::size_t m = 0; m < ns; ++m) {
    double total = 0, var = 0;
    for (int k = 0; k < mc.strata; ++k) total += result[k].mean[m], var += result[k].var[m];
    rep.s.push_back(s_values[m]);
    rep.measure.push_back(total);
    rep.ci.push_back(1.96 * std::sqrt(var));
    rep.max_relative_ci = std::max(rep.max_relative_ci, total > 0 ? rep.ci.back() / total : INFINITY);
    lx.push_back(std::log(s_values[m]));
    ly.push_back(std::log(total));
  }
  rep.slope = linear_fit(lx, ly).slope;
  rep.ci_ok = rep.max_relative_ci <= 0.05;
  return rep;
}

std::string to_string(Finiteness f) {
  switch (f) {
    case Finiteness::Finite: return "Finite";
    case Finiteness::Divergent: return "Divergent";
    default: return "Inconclusive";
  }
}

IntegrabilityReport kernel_Lq_integrability(const KernelConfig& cfg, double q, int levels, double margin) {
  if (!(q > 1)) throw DomainError("q must be > 1");
  if (levels < 4) throw DomainError("need at least four nested regions");
  const int N = cfg.params.N;
  const double b = derive_exponents(cfg.params).boundary_exponent();
  using boost::math::quadrature::gauss;
  const double tangential = N == 2 ? 2.0 : sphere_area(N - 1);

  // Shell integral over a <= |x - pole| <= c in polar coordinates about the pole.
  auto shell = [&](double a, double c) {
    auto radial = [&](double r) {
      auto angular = [&](double th) {
        Eigen::VectorXd x = pole_of(cfg);
        x(N - 1) += r * std::cos(th);
        x(0) += r * std::sin(th);
        const double k = poisson_kernel(cfg, x);
        const double s = N == 2 ? 1.0 : std::pow(std::sin(th), N - 2);
        return std::pow(k, q) * std::pow(x(N - 1), b) * s;
      };
      return std::pow(r, N - 1) * gauss<double, 30>::integrate(angular, 0.0, 0.5 * std::numbers::pi);
    };
    // integrate in log r for scale-free accuracy
    return gauss<double, 30>::integrate([&](double t) { const double r = std::exp(t); return radial(r) * r; },
                                        std::log(a), std::log(c));
  };

  IntegrabilityReport rep;
  rep.predicted_exponent = N + b - q * (N + b - 2.0);
  std::vector<double> inc;
  double total = 0;
  for (int j = 1; j <= levels; ++j) {
    const double eps = std::ldexp(1.0, -j);
    const double piece = tangential * shell(eps, 2 * eps);
    inc.push_back(piece);
    total += piece;
    rep.radius.push_back(eps);
    rep.cumulative.push_back(total);
  }
  std::vector<double> jx, ly;
  for (std::size_t j = 0; j < inc.size(); ++j) {
    jx.push_back(std::log(rep.radius[j]));
    ly.push_back(std::log(inc[j]));
  }
  rep.fitted_exponent = linear_fit(jx, ly).slope;

  // undecided strip: |q - critical_q| < margin / 2
  const double band = 0.5 * margin * (N + b - 2.0);
  if (std::abs(rep.fitted_exponent) < band) {
    rep.verdict = Finiteness::Inconclusive;
  } else if (rep.fitted_exponent > 0) {
    rep.verdict = Finiteness::Finite;
  } else {
    const bool rate_ok = std::abs(rep.fitted_exponent - rep.predicted_exponent) <=
                         0.05 * std::abs(rep.predicted_exponent) + 1e-9;
    rep.verdict = rate_ok ? Finiteness::Divergent : Finiteness::Inconclusive;
  }
  return rep;
}

}  // namespace hardy
