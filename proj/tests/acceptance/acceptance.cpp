// Acceptance suite: one PASS/FAIL line per criterion, runtime included in the verdict.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "hardy/admissibility.hpp"
#include "hardy/barriers.hpp"
#include "hardy/bvp.hpp"
#include "hardy/kernels.hpp"
#include "hardy/linear1d.hpp"
#include "hardy/params.hpp"
#include "hardy/spherical.hpp"

using namespace hardy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("violated: " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.note(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0 && secs >= budget_seconds) {
    o.pass = false;
    o.note("runtime over budget " + fmt("%g s", budget_seconds));
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s [%.2f s] %s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
  std::fflush(stdout);
}

Outcome exponent_algebra() {
  Outcome o;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(2, 10);
  std::uniform_real_distribution<double> kap(1e-9, 0.25), pw(1.0001, 8.0);
  double worst = 0;
  int sign_bad = 0, cap_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = make_params(dim(rng), kap(rng), pw(rng));
    const auto e = derive_exponents(p);
    worst = std::max({worst, std::abs(e.alpha_plus + e.alpha_minus - 2), std::abs(e.alpha_plus * e.alpha_minus - 4 * p.kappa)});
    const double q = *p.q;
    if ((e.critical_q - q > 0) != (*e.separable_level - e.first_eigenvalue > 0)) ++sign_bad;
    const auto c = capacity_index(p);
    if ((c.s * c.q_prime <= c.dim) != (q >= e.critical_q)) ++cap_bad;
  }
  o.require(worst <= 1e-14, "sum/product identities to 1e-14");
  o.require(sign_bad == 0, "sign(q_c - q) = sign(l_qN - mu)");
  o.require(cap_bad == 0, "s q' <= N-1 iff q >= q_c");
  o.note("max identity error " + fmt("%.2e", worst));
  return o;
}

Outcome linear_spherical() {
  Outcome o;
  const auto p = make_params(3, 3.0 / 16);
  std::vector<double> r1, r2;
  for (int n : {512, 1024, 2048, 4096}) {
    const auto g = make_azimuthal_grid(n);
    r1.push_back(first_eigen_check(p, g).residual_norm);
    r2.push_back(second_eigen_check(p, g).residual_norm);
  }
  std::string ratios;
  for (std::size_t i = 1; i < r1.size(); ++i) {
    const double a = r1[i - 1] / r1[i], b = r2[i - 1] / r2[i];
    o.require(std::abs(a / 4 - 1) <= 0.1, "first-mode residual ratio 4 +- 10%");
    o.require(std::abs(b / 4 - 1) <= 0.1, "second-mode residual ratio 4 +- 10%");
    ratios += fmt(" %.3f", a) + fmt("/%.3f", b);
  }
  o.note("halving ratios (first/second):" + ratios);
  return o;
}

Outcome spherical_dichotomy() {
  Outcome o;
  const auto g = make_azimuthal_grid(512);
  for (double kappa : {1.0 / 16, 1.0 / 8, 3.0 / 16, 1.0 / 4}) {
    const double qc = derive_exponents(make_params(3, kappa)).critical_q;
    double lo = 1.2, hi = qc + 0.5;
    const auto exists = [&](double q) { return solve_omega_shooting(make_params(3, kappa, q), g).verdict == Verdict::Exists; };
    o.require(exists(lo) && !exists(hi), "bracketing verdicts");
    while (hi - lo > 1e-5) {
      const double mid = 0.5 * (lo + hi);
      (exists(mid) ? lo : hi) = mid;
    }
    const double flip = 0.5 * (lo + hi);
    o.require(std::abs(flip - qc) <= 1e-4, "verdict flip within 1e-4 of q_c");
    o.note("kappa=" + fmt("%g", kappa) + " flip-q_c=" + fmt("%.1e", flip - qc));
  }
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(2, 5);
  std::uniform_real_distribution<double> kap(0.01, 0.25), frac(0.05, 0.95);
  double worst = 0, eps_min = INFINITY;
  for (int i = 0; i < 10; ++i) {
    const int N = dim(rng);
    const double kappa = kap(rng);
    const double qc = derive_exponents(make_params(N, kappa)).critical_q;
    const auto p = make_params(N, kappa, 1 + frac(rng) * (qc - 1));
    const auto a = solve_omega_shooting(p, g);
    const auto b = solve_omega_variational(p, g);
    o.require(a.verdict == Verdict::Exists && b.verdict == Verdict::Exists, "both solvers find omega");
    if (a.verdict != Verdict::Exists || b.verdict != Verdict::Exists) continue;
    worst = std::max(worst, (a.omega - b.omega).lpNorm<Eigen::Infinity>() / a.omega.lpNorm<Eigen::Infinity>());
    eps_min = std::min(eps_min, a.epsilon_sub);
    o.require(a.ratio_min >= a.epsilon_sub, "omega >= eps psi");
  }
  o.require(worst <= 1e-3, "shooting vs variational within 1e-3");
  o.require(eps_min > 0, "eps_sub > 0");
  o.note("profile gap " + fmt("%.2e", worst) + ", min eps_sub " + fmt("%.3g", eps_min));
  return o;
}

Outcome interval_exponent() {
  Outcome o;
  const auto m = make_interval_mesh();
  for (double kappa : {1.0 / 8, 3.0 / 16, 1.0 / 4}) {
    const auto p = make_params(2, kappa);
    const double slope = endpoint_log_slope(eigenpair(p, m).phi);
    const double err = std::abs(slope - derive_exponents(p).boundary_exponent());
    o.require(err <= 0.01, "endpoint slope within 0.01");
    o.note("kappa=" + fmt("%g", kappa) + " slope err " + fmt("%.1e", err));
  }
  const auto h = hardy_constant_check(m);
  o.require(h.value >= 0.25 - 1e-3, "discrete Hardy constant >= 1/4 - 1e-3");
  o.note("Hardy constant " + fmt("%.6f", h.value));
  return o;
}

Outcome poisson_kernel_checks() {
  Outcome o;
  for (double kappa : {1.0 / 16, 3.0 / 16, 1.0 / 4})
    for (int N : {2, 3}) {
      const auto p = make_params(N, kappa);
      const auto cfg = make_kernel_config(p);
      Box box{Eigen::VectorXd::Constant(N, -0.5), Eigen::VectorXd::Constant(N, 0.5)};
      box.lo(N - 1) = 0.5;
      box.hi(N - 1) = 1.5;
      const double r1 = harmonicity_residual(cfg, box, 0.05), r2 = harmonicity_residual(cfg, box, 0.025);
      const double order = std::log2(r1 / r2);
      o.require(std::abs(order - 2) <= 0.2, "FD residual order 2 +- 0.2");
      Eigen::VectorXd x = Eigen::VectorXd::Constant(N, 0.2);
      x(N - 1) = 0.7;
      const auto fit = homogeneity_degree(cfg, {x}, {0.25, 0.5, 1, 2, 4});
      o.require(std::abs(fit.slope - (2 - N - derive_exponents(p).boundary_exponent())) <= 1e-6, "homogeneity degree to 1e-6");
      if (N == 3 && kappa == 0.25) o.note("order " + fmt("%.4f", order) + ", degree " + fmt("%.9f", fit.slope));
    }
  return o;
}

Outcome marcinkiewicz() {
  Outcome o;
  std::vector<double> s;
  for (int i = 0; i <= 8; ++i) s.push_back(std::pow(10.0, 1 + 0.25 * i));
  for (double kappa : {1.0 / 8, 1.0 / 4}) {
    const auto r = marcinkiewicz_decay(make_kernel_config(make_params(3, kappa)), s);
    const double rel = std::abs(r.slope / r.target - 1);
    o.require(rel <= 0.05, "slope within 5%");
    o.require(r.max_relative_ci <= 0.05, "CI <= 5%");
    o.note("kappa=" + fmt("%g", kappa) + " slope err " + fmt("%.2e", rel) + " CI " + fmt("%.3f", r.max_relative_ci));
  }
  return o;
}

Outcome integrability() {
  Outcome o;
  const auto cfg = make_kernel_config(make_params(3, 0.25));
  const double qc = 7.0 / 3;
  o.require(kernel_Lq_integrability(cfg, qc - 0.02).verdict == Finiteness::Finite, "finite at q_c - 0.02");
  o.require(kernel_Lq_integrability(cfg, qc + 0.02).verdict == Finiteness::Divergent, "divergent at q_c + 0.02");
  return o;
}

const Params model = make_params(2, 0.25, 2.0);

Outcome weak_singularity() {
  Outcome o;
  for (double k : {1.0, 4.0}) {
    SolveReport last;
    for (double rin : {1e-2, 1e-3, 1e-4}) last = solve_dirac(model, make_polar_mesh(rin, 0.9, 65), k).report;
    o.require(last.converged && last.bracket_ok, "solver converged and bracketed");
    o.require(last.weak_ratio_min >= 0.98 && last.weak_ratio_max <= 1.02, "ratio in [0.98, 1.02]");
    o.note("k=" + fmt("%g", k) + " ratio [" + fmt("%.5f", last.weak_ratio_min) + fmt(", %.5f]", last.weak_ratio_max));
  }
  return o;
}

Outcome strong_singularity() {
  Outcome o;
  const auto r = solve_strong_singularity(model, make_polar_mesh(1e-4, 0.9, 129)).report;
  o.require(r.selected_k.has_value(), "ladder selected an amplitude");
  for (const auto& s : r.profiles) {
    if (s.radius < 2.9e-3) continue;
    o.require(s.distance <= 0.05, "profile within 5% at r=" + fmt("%g", s.radius));
    o.note("r=" + fmt("%g", s.radius) + " dist " + fmt("%.4f", s.distance));
  }
  if (r.top_rung_distance) o.note("top rung dist " + fmt("%.3f", *r.top_rung_distance));
  return o;
}

Outcome ko_trace() {
  Outcome o;
  const auto r = solve_maximal(model);
  o.require(r.relative_error <= 0.05, "extrapolated trace within 5% of 25/4");
  o.note("extrapolated " + fmt("%.4f", r.extrapolated) + " rel err " + fmt("%.2e", r.relative_error));
  return o;
}

Outcome barrier_certification() {
  Outcome o;
  struct Case {
    int N;
    double kappa, q, beta, gamma;
  };
  for (const Case c : {Case{3, 3.0 / 16, 2, 3, 0.5}, Case{2, 0.125, 2, 3, 0.4}, Case{3, 0.0625, 3, 2, 0.3},
                       Case{3, 0.25, 2, 3, 0.5}, Case{4, 0.2, 2.5, 2.5, 0.6}}) {
    BarrierSpec b;
    b.params = make_params(c.N, c.kappa, c.q);
    b.R = 0.5;
    b.beta = c.beta;
    b.gamma = c.gamma;
    const FlatGrid grid{200};
    const double thr = lambda_threshold(b, grid).threshold;
    b.Lambda = 10 * thr;
    const double m10 = supersolution_residual(b, grid).min_residual;
    o.require(m10 >= 0, "nonnegative residual at 10 x threshold");
    double prev = -INFINITY;
    for (double f : {1.0, 2.0, 4.0, 8.0}) {
      b.Lambda = f * thr;
      const double m = supersolution_residual(b, grid).min_normalized;
      o.require(m >= prev, "ladder monotone");
      prev = m;
    }
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome o;
  const char* exe = std::getenv("HARDY_TOOL");
  o.require(exe != nullptr, "HARDY_TOOL set");
  if (!exe) return o;
  const auto dir = fs::temp_directory_path() / ("hardy_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> manifests = {
      {"mc.txt", "command = kernel-marcinkiewicz\nN = 3\nkappa = 0.125\nkappa = 0.25\nseed = 99\n"},
      {"bvp.txt", "command = bvp-dirac\nN = 2\nkappa = 0.25\nq = 2\nq = 3\nk = 1\nk = 2\nrin = 1e-3\n"},
      {"omega.txt", "command = omega\nN = 3\nkappa_range = 0.05 0.25 0.05\nq = 2\n"}};
  std::size_t files = 0;
  for (const auto& [name, text] : manifests) {
    std::ofstream(dir / name) << text;
    for (const char* run : {"a", "b"}) {
      const std::string cmd = std::string(exe) + " --jobs " + (run[0] == 'a' ? "1" : "3") + " --out " +
                              (dir / (name + run)).string() + " sweep " + (dir / name).string() + " >/dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      o.require(WEXITSTATUS(status) == 0, name + " sweep exit status 0");
    }
    for (const auto& f : fs::recursive_directory_iterator(dir / (name + "a"))) {
      if (!f.is_regular_file() || f.path().filename() == "metadata.json") continue;
      const auto rel = fs::relative(f.path(), dir / (name + "a"));
      o.require(slurp(f.path()) == slurp(dir / (name + "b") / rel), "identical " + rel.string());
      ++files;
    }
  }
  o.note(std::to_string(files) + " files compared");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  criterion(1, "exponent algebra", 1, exponent_algebra);
  criterion(2, "linear spherical identity", 5, linear_spherical);
  criterion(3, "spherical nonlinear dichotomy", 120, spherical_dichotomy);
  criterion(4, "interval eigenfunction exponent", 30, interval_exponent);
  criterion(5, "Poisson kernel", 10, poisson_kernel_checks);
  criterion(6, "Marcinkiewicz decay", 60, marcinkiewicz);
  criterion(7, "integrability threshold", 60, integrability);
  criterion(8, "weak singularity", 300, weak_singularity);
  criterion(9, "strong singularity", 600, strong_singularity);
  criterion(10, "Keller-Osserman trace", 300, ko_trace);
  criterion(11, "barrier certification", 30, barrier_certification);
  criterion(12, "determinism", 0, determinism);
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
