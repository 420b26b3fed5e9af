#include "hardy/barriers.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace hardy {

double BarrierSpec::scale() const { return log_scale > 0 ? log_scale : std::numbers::e * R; }

double min_beta(const BarrierSpec& s) {
  const double g = is_critical(s.params.kappa) ? 0.5 : s.gamma;
  return std::max({blowup_exponent(s.params.power()) + g, 0.5 * (s.params.N - 2), 1.0});
}

void validate(const BarrierSpec& s) {
  validate(s.params);
  s.params.power();
  if (!(s.R > 0)) throw DomainError("barrier radius must be positive");
  if (!(s.Lambda >= 0)) throw DomainError("barrier amplitude must be nonnegative");
  if (!(s.beta >= min_beta(s) - 1e-12)) throw DomainError("beta below the admissible minimum");
  if (!is_critical(s.params.kappa)) {
    const auto e = derive_exponents(s.params);
    if (!(s.gamma > 0.5 * e.alpha_minus && s.gamma < 0.5 * e.alpha_plus))
      throw DomainError("gamma must lie strictly between alpha_-/2 and alpha_+/2");
  } else if (!(s.scale() > s.R)) {
    throw DomainError("log scale must exceed R");
  }
  if (s.z.size() && s.z.size() != s.params.N) throw DomainError("boundary point dimension does not match N");
}

double barrier_eval(const BarrierSpec& s, const Eigen::VectorXd& x) {
  validate(s);
  const int N = s.params.N;
  const Eigen::VectorXd z = s.z.size() ? s.z : Eigen::VectorXd::Zero(N);
  const double r2 = (x - z).squaredNorm();
  if (!(r2 < s.R * s.R)) throw DomainError("point outside the barrier ball");
  const double d = x(N - 1);
  if (!(d > 0)) throw DomainError("point must be interior");
  const double A = s.R * s.R - r2;
  if (is_critical(s.params.kappa)) return s.Lambda * std::pow(A, -s.beta) * std::sqrt(d * std::log(s.scale() / d));
  return s.Lambda * std::pow(A, -s.beta) * std::pow(d, s.gamma);
}

ResidualParts flat_residual_parts(const BarrierSpec& s, double rho, double y) {
  const double N = s.params.N, k = s.params.kappa, q = s.params.power(), beta = s.beta, R = s.R;
  const double r2 = rho * rho + y * y;
  const double A = R * R - r2;
  // -Delta A^{-beta} = -2 beta A^{-beta-2} (N R^2 + (2 beta + 2 - N) r^2); grad A^{-beta} = 2 beta A^{-beta-1} x
  const double lap_cap = 2.0 * beta * std::pow(A, -beta - 2.0) * (N * R * R + (2.0 * beta + 2.0 - N) * r2);
  const double cap = std::pow(A, -beta);
  const double cap_grad = 2.0 * beta * std::pow(A, -beta - 1.0);  // times x
  double h, h_lin, dh;  // profile, -(h'' + k h / y^2), h'
  if (is_critical(k)) {
    const double L = std::log(s.scale() / y);
    h = std::sqrt(y * L);
    h_lin = 0.25 * std::pow(y, -1.5) * std::pow(L, -1.5);
    dh = 0.5 / std::sqrt(y) * (std::sqrt(L) - 1.0 / std::sqrt(L));
  } else {
    const double g = s.gamma;
    h = std::pow(y, g);
    h_lin = -(g * (g - 1.0) + k) * std::pow(y, g - 2.0);
    dh = g * std::pow(y, g - 1.0);
  }
  // L(cap h) = cap (-(h'' + k h/y^2)) - h Delta cap - 2 grad cap . grad h, with x . grad d = y
  ResidualParts p;
  p.linear = cap * h_lin - h * lap_cap - 2.0 * cap_grad * y * dh;
  p.nonlinear = std::pow(cap * h, q);
  return p;
}

double flat_residual(const BarrierSpec& s, double rho, double y) {
  const auto p = flat_residual_parts(s, rho, y);
  return s.Lambda * (p.linear + std::pow(s.Lambda, s.params.power() - 1.0) * p.nonlinear);
}

namespace {

template <class F>
void for_each_point(const BarrierSpec& s, const FlatGrid& g, F&& f) {
  const double h = s.R / g.n;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double rho = (i + 0.5) * h, y = (j + 0.5) * h;
      if (rho * rho + y * y < s.R * s.R) f(rho, y);
    }
}

double min_normalized(const std::vector<ResidualParts>& parts, double lambda, double q) {
  double m = INFINITY;
  const double lq = std::pow(lambda, q - 1.0);
  for (const auto& p : parts) m = std::min(m, p.linear + lq * p.nonlinear);
  return m;
}

}  // namespace

ResidualReport supersolution_residual(const BarrierSpec& s, const FlatGrid& g) {
  validate(s);
  const double q = s.params.power();
  const double lq = std::pow(s.Lambda, q - 1.0);
  const double eps0 = is_critical(s.params.kappa) ? 0.0 : -(s.gamma * (s.gamma - 1.0) + s.params.kappa);
  ResidualReport r;
  r.min_residual = INFINITY;
  r.min_normalized = INFINITY;
  for_each_point(s, g, [&](double rho, double y) {
    const auto p = flat_residual_parts(s, rho, y);
    const double nrm = p.linear + lq * p.nonlinear;
    r.min_residual = std::min(r.min_residual, s.Lambda * nrm);
    if (nrm < r.min_normalized) {
      r.min_normalized = nrm;
      r.argmin_rho = rho;
      r.argmin_y = y;
    }
    ++r.points;
  });
  const double A = s.R * s.R - r.argmin_rho * r.argmin_rho - r.argmin_y * r.argmin_y;
  r.argmin_near_boundary = r.argmin_y <= eps0 * A / (16.0 * s.beta * s.R);
  return r;
}

std::array<double, 2> threshold_powers(const BarrierSpec& s) {
  const double q = s.params.power(), b = s.beta, R = s.R;
  if (is_critical(s.params.kappa))
    return {std::pow(R, 2 * b - 2.0 / (q - 1.0) - 0.5), std::pow(R, 3 * b - 2.0 / (q - 1.0))};
  return {std::pow(R, 2 * b), std::pow(R, 2 * b - s.gamma - 1.0 / (q - 1.0))};
}

ThresholdReport lambda_threshold(const BarrierSpec& spec, const FlatGrid& g) {
  BarrierSpec s = spec;
  s.Lambda = 1.0;
  validate(s);
  using Key = std::tuple<int, double, double, double, double, double, double, int>;
  static std::map<Key, ThresholdReport> cache;
  static std::mutex guard;
  const Key key{s.params.N, s.params.kappa, s.params.power(), s.R, s.beta,
                is_critical(s.params.kappa) ? 0.0 : s.gamma, s.scale(), g.n};
  {
    std::lock_guard lock(guard);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  std::vector<ResidualParts> parts;
  for_each_point(s, g, [&](double rho, double y) { parts.push_back(flat_residual_parts(s, rho, y)); });
  const double q = s.params.power();
  double lo = 1e-300, hi = 1.0;
  while (min_normalized(parts, hi, q) < 0) {
    lo = hi;
    hi *= 16.0;
    if (hi > 1e300) throw std::runtime_error("no certifying amplitude found");
  }
  if (lo == 1e-300 && min_normalized(parts, lo, q) >= 0) hi = lo;
  for (int it = 0; it < 200 && hi > lo * (1 + 1e-12); ++it) {
    const double mid = std::sqrt(lo * hi);
    (min_normalized(parts, mid, q) >= 0 ? hi : lo) = mid;
  }
  ThresholdReport r;
  r.lambda_min = hi;
  r.threshold = 2.0 * hi;
  const auto pw = threshold_powers(s);
  r.constant = r.threshold / std::max(pw[0], pw[1]);
  std::lock_guard lock(guard);
  cache.emplace(key, r);
  return r;
}

}  // namespace hardy
