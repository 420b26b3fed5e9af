#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "hardy/admissibility.hpp"
#include "hardy/barriers.hpp"
#include "hardy/bvp.hpp"
#include "hardy/cli.hpp"
#include "hardy/kernels.hpp"
#include "hardy/linear1d.hpp"
#include "hardy/params.hpp"
#include "hardy/spherical.hpp"

namespace hardy::cli {

namespace fs = std::filesystem;

namespace {

struct CommandSpec {
  std::string name;
  bool power = false;
  std::vector<std::pair<std::string, std::string>> options;  // name, default
  std::string help;
};

const std::vector<CommandSpec>& specs() {
  static const std::vector<CommandSpec> table = {
      {"exponents", false, {}, "closed-form exponents and thresholds"},
      {"admissible", true, {}, "capacity index and Dirac admissibility"},
      {"omega", true, {{"grid", "512"}, {"method", "shoot"}}, "positive spherical solution"},
      {"linear1d-eigen", false, {{"dmin", "1e-8"}, {"ratio", "0.7498942093324559"}, {"hmax", "0.02"}},
       "first eigenpair on (0,1)"},
      {"linear1d-green", false, {{"dmin", "1e-8"}, {"ratio", "0.7498942093324559"}, {"hmax", "0.02"}, {"y", "0.3"}},
       "Green function against its envelope"},
      {"linear1d-dirichlet", false,
       {{"dmin", "1e-8"}, {"ratio", "0.7498942093324559"}, {"hmax", "0.02"}, {"h0", "1"}, {"h1", "1"}},
       "W-normalized Dirichlet problem"},
      {"linear1d-hardy-const", false, {{"dmin", "1e-8"}, {"ratio", "0.7498942093324559"}, {"hmax", "0.02"}},
       "discrete Hardy constant"},
      {"kernel-eval", false, {{"x", ""}, {"scales", "0.5,1,2,4"}, {"normalize", ""}}, "kernel value and homogeneity"},
      {"kernel-residual", false, {{"spacing", "0.1,0.05,0.025,0.0125"}, {"normalize", ""}}, "finite-difference residual of the kernel"},
      {"kernel-marcinkiewicz", false,
       {{"samples", "1000000"}, {"strata", "36"}, {"s", ""}, {"inner", "1e-3"}, {"outer", "1"}, {"normalize", ""}},
       "weighted level-set decay"},
      {"kernel-integrability", true, {{"levels", "14"}, {"margin", "0.02"}, {"normalize", ""}}, "L^q integrability near the pole"},
      {"bvp-dirac", true,
       {{"k", "1"}, {"rin", "1e-4"}, {"rho", "0.9"}, {"angles", "65"}, {"method", "newton"}, {"cross", "0"}},
       "Dirac boundary data on the half-disk"},
      {"bvp-strong", true, {{"rin", "1e-4"}, {"rho", "0.9"}, {"angles", "65"}, {"kmax", "4294967296"}},
       "strong singularity by the k-ladder"},
      {"bvp-maximal", true, {{"readout", "0.02"}, {"data", "1e12"}, {"xcells", "48"}, {"grading", "1.04"}},
       "boundary trace of the maximal solution"},
      {"barrier-eval", true, {{"R", "1"}, {"beta", "3"}, {"gamma", "0.5"}, {"Lambda", "1"}, {"x", ""}},
       "barrier value"},
      {"barrier-threshold", true, {{"R", "1"}, {"beta", "3"}, {"gamma", "0.5"}, {"grid", "200"}},
       "certified amplitude threshold"},
      {"barrier-certify", true,
       {{"R", "1"}, {"beta", "3"}, {"gamma", "0.5"}, {"grid", "200"}, {"factor", "10"}},
       "supersolution residual on the flat grid"},
  };
  return table;
}

const CommandSpec& spec_of(const std::string& name) {
  for (const auto& s : specs())
    if (s.name == name) return s;
  throw DomainError("unknown command: " + name);
}

class Getter {
 public:
  Getter(const CommandSpec& spec, const Options& given) : spec_(spec) {
    for (const auto& [k, v] : spec.options) values_[k] = v;
    for (const auto& [k, v] : given) {
      if (!values_.count(k)) throw DomainError("command " + spec.name + " has no option '" + k + "'");
      values_[k] = v;
    }
  }
  std::string text(const std::string& k) const { return values_.at(k); }
  double num(const std::string& k) const {
    const auto& v = values_.at(k);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw DomainError("option '" + k + "' is not a number: " + v);
  }
  int integer(const std::string& k) const {
    const double x = num(k);
    if (x != std::floor(x)) throw DomainError("option '" + k + "' must be an integer");
    return static_cast<int>(x);
  }
  std::vector<double> list(const std::string& k) const {
    std::vector<double> out;
    std::string v = values_.at(k);
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream in(v);
    for (std::string t; in >> t;) {
      try {
        out.push_back(std::stod(t));
      } catch (const std::exception&) {
        throw DomainError("option '" + k + "' holds a non-number: " + t);
      }
    }
    return out;
  }
  Json echo() const {
    Json j = Json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  const CommandSpec& spec_;
  std::map<std::string, std::string> values_;
};

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json vec(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Series series(std::string name, std::string xl, std::string yl, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Series s{std::move(name), std::move(xl), std::move(yl), {}, {}};
  s.x.assign(x.data(), x.data() + x.size());
  s.y.assign(y.data(), y.data() + y.size());
  return s;
}

Table columns_table(std::string name, std::vector<std::string> header, const std::vector<Eigen::VectorXd>& cols) {
  Table t{std::move(name), std::move(header), {}};
  for (Eigen::Index i = 0; i < cols.front().size(); ++i) {
    std::vector<double> row;
    for (const auto& c : cols) row.push_back(c(i));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Json params_json(const Params& p) {
  Json j;
  j["N"] = p.N;
  j["kappa"] = p.kappa;
  j["q"] = opt(p.q);
  return j;
}

IntervalMesh interval_mesh(const Getter& g) { return make_interval_mesh(g.num("dmin"), g.num("ratio"), g.num("hmax")); }

Eigen::VectorXd point_arg(const Getter& g, int N, const std::string& key) {
  const auto xs = g.list(key);
  if (static_cast<int>(xs.size()) != N) throw DomainError("option '" + key + "' needs " + std::to_string(N) + " coordinates");
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), N);
}

// normalize=x0 rescales the kernel to equal 1 at x0
KernelConfig kernel_config(const Params& p, const Getter& g) {
  auto cfg = make_kernel_config(p);
  if (!g.text("normalize").empty()) cfg = normalized_at(cfg, point_arg(g, p.N, "normalize"));
  return cfg;
}

BarrierSpec barrier_spec(const Params& p, const Getter& g) {
  BarrierSpec b;
  b.params = p;
  b.R = g.num("R");
  b.beta = g.num("beta");
  b.gamma = g.num("gamma");
  return b;
}

Json solve_report_json(const SolveReport& r) {
  Json j;
  j["params"] = params_json(r.params);
  j["mesh"] = r.mesh;
  j["method"] = to_string(r.method);
  j["k"] = r.k;
  j["iterations"] = r.iterations;
  j["residual_history"] = vec(r.residual_history);
  j["converged"] = r.converged;
  j["fallback"] = r.fallback;
  j["bracket_ok"] = r.bracket_ok;
  j["cross_difference"] = opt(r.cross_difference);
  j["weak_limit"] = opt(r.weak_limit);
  j["weak_ratio_min"] = r.weak_ratio_min;
  j["weak_ratio_max"] = r.weak_ratio_max;
  j["weak_ok"] = r.weak_ok();
  j["strong_ok"] = r.strong_ok();
  j["profile_distance"] = opt(r.profile_distance);
  Json prof = Json::array();
  for (const auto& p : r.profiles) prof.push_back({{"radius", p.radius}, {"distance", p.distance}, {"edge_slope", p.edge_slope}});
  j["profiles"] = prof;
  j["apriori_constant"] = opt(r.apriori_constant);
  j["lower_constant"] = opt(r.lower_constant);
  j["ladder"] = vec(r.ladder);
  j["ladder_increments"] = vec(r.ladder_increments);
  j["ladder_defects"] = vec(r.ladder_defects);
  j["selected_k"] = opt(r.selected_k);
  j["top_rung_distance"] = opt(r.top_rung_distance);
  j["warnings"] = r.warnings;
  j["config_hash"] = r.config_hash;
  return j;
}

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

void add_profiles(RunOutput& out, const SolveReport& r) {
  for (const auto& p : r.profiles) {
    Table t;
    t.name = "profile_r" + short_number(p.radius);
    t.header = {"theta", "scaled", "reference"};
    for (Eigen::Index j = 0; j < p.theta.size(); ++j) t.rows.push_back({p.theta(j), p.scaled(j), p.reference(j)});
    out.tables.push_back(std::move(t));
    out.series.push_back(series(t.name, "theta", "scaled", p.theta, p.scaled));
  }
}

// ---- command bodies ----------------------------------------------------

RunOutput do_exponents(const Params& p, const Getter&, std::uint64_t, std::optional<double>) {
  const auto e = derive_exponents(p);
  RunOutput out;
  auto& j = out.report;
  j["alpha_plus"] = e.alpha_plus;
  j["alpha_minus"] = e.alpha_minus;
  j["critical_q"] = e.critical_q;
  j["uniqueness_q"] = e.uniqueness_q;
  j["first_eigenvalue"] = e.first_eigenvalue;
  j["second_eigenvalue"] = e.second_eigenvalue;
  j["separable_level"] = opt(e.separable_level);
  j["trace_constant"] = opt(e.trace_constant);
  j["subcritical"] = p.q ? Json(subcritical(p)) : Json(nullptr);
  out.columns = {{"alpha_plus", e.alpha_plus},
                 {"alpha_minus", e.alpha_minus},
                 {"critical_q", e.critical_q},
                 {"uniqueness_q", e.uniqueness_q},
                 {"first_eigenvalue", e.first_eigenvalue},
                 {"second_eigenvalue", e.second_eigenvalue},
                 {"separable_level", e.separable_level.value_or(NAN)},
                 {"trace_constant", e.trace_constant.value_or(NAN)},
                 {"subcritical", p.q ? double(subcritical(p)) : NAN}};
  return out;
}

RunOutput do_admissible(const Params& p, const Getter&, std::uint64_t, std::optional<double>) {
  const auto c = capacity_index(p);
  RunOutput out;
  const bool adm = dirac_admissible(p), sub = subcritical(p), charged = c.points_charged();
  out.report["s"] = c.s;
  out.report["q_prime"] = c.q_prime;
  out.report["dim"] = c.dim;
  out.report["s_times_q_prime"] = c.s * c.q_prime;
  out.report["dirac_admissible"] = adm;
  out.report["subcritical"] = sub;
  out.report["points_charged"] = charged;
  out.ok = adm == sub && sub == charged;
  out.columns = {{"s", c.s}, {"q_prime", c.q_prime}, {"dim", double(c.dim)}, {"dirac_admissible", double(adm)}};
  return out;
}

Json spherical_json(const SphericalSolution& s) {
  Json j;
  j["verdict"] = to_string(s.verdict);
  j["shoot_value"] = s.shoot_value;
  j["residual_norm"] = s.residual_norm;
  j["epsilon_sub"] = s.epsilon_sub;
  j["ratio_min"] = s.ratio_min;
  j["iterations"] = s.iterations;
  j["message"] = s.message;
  return j;
}

RunOutput do_omega(const Params& p, const Getter& g, std::uint64_t, std::optional<double> tol) {
  const auto grid = make_azimuthal_grid(g.integer("grid"));
  const std::string method = g.text("method");
  if (method != "shoot" && method != "variational" && method != "both")
    throw DomainError("method must be shoot, variational or both");
  ShootOptions so;
  if (tol) so.tol = *tol;
  RunOutput out;
  SphericalSolution main;
  if (method == "variational") {
    main = solve_omega_variational(p, grid);
  } else {
    main = solve_omega_shooting(p, grid, so);
  }
  out.report = spherical_json(main);
  out.ok = main.verdict != Verdict::Inconclusive && (main.verdict != Verdict::Exists || main.residual_norm <= so.tol);
  double diff = NAN;
  if (method == "both" && main.verdict == Verdict::Exists) {
    const auto var = solve_omega_variational(p, grid);
    out.report["variational"] = spherical_json(var);
    diff = (var.omega - main.omega).lpNorm<Eigen::Infinity>() / main.omega.lpNorm<Eigen::Infinity>();
    out.report["profile_difference"] = diff;
    out.ok = out.ok && diff <= 1e-3;
  }
  out.columns = {{"exists", double(main.verdict == Verdict::Exists)},
                 {"shoot_value", main.shoot_value},
                 {"residual_norm", main.residual_norm},
                 {"epsilon_sub", main.epsilon_sub},
                 {"profile_difference", diff}};
  if (main.verdict == Verdict::Exists) {
    const Eigen::VectorXd psi = ground_state(p, grid.theta);
    out.series.push_back(series("omega", "theta", "omega", grid.theta, main.omega));
    out.tables.push_back(columns_table("omega", {"theta", "omega", "psi"}, {grid.theta, main.omega, psi}));
  }
  return out;
}

RunOutput do_eigen(const Params& p, const Getter& g, std::uint64_t, std::optional<double> tol) {
  const auto m = interval_mesh(g);
  const auto r = eigenpair(p, m);
  const double slope = endpoint_log_slope(r.phi);
  const double target = derive_exponents(p).boundary_exponent();
  RunOutput out;
  out.report["eigenvalue"] = r.lambda;
  out.report["endpoint_slope"] = slope;
  out.report["target_slope"] = target;
  out.report["iterations"] = r.iterations;
  out.report["nodes"] = m.size();
  out.ok = std::abs(slope - target) <= tol.value_or(0.01);
  out.columns = {{"eigenvalue", r.lambda}, {"endpoint_slope", slope}, {"target_slope", target}};
  out.series.push_back(series("eigenfunction", "x", "phi", r.phi.x, r.phi.values));
  out.tables.push_back(columns_table("eigenfunction", {"x", "phi"}, {r.phi.x, r.phi.values}));
  return out;
}

RunOutput do_green(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  const auto m = interval_mesh(g);
  const double y = g.num("y");
  if (!(y > 0 && y < 1)) throw DomainError("source point must lie in (0,1)");
  Eigen::Index iy = 0;
  (m.x.array() - y).abs().minCoeff(&iy);
  const auto G = green_function(p, m, iy);
  double lo = INFINITY, hi = 0;
  Eigen::VectorXd ratio(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    ratio(i) = G.values(i) / green_envelope(p, m.x(i), m.x(iy));
    lo = std::min(lo, ratio(i));
    hi = std::max(hi, ratio(i));
  }
  RunOutput out;
  out.report["source"] = m.x(iy);
  out.report["envelope_ratio_min"] = lo;
  out.report["envelope_ratio_max"] = hi;
  out.ok = lo > 0 && std::isfinite(hi);
  out.columns = {{"source", m.x(iy)}, {"envelope_ratio_min", lo}, {"envelope_ratio_max", hi}};
  out.series.push_back(series("green", "x", "G", G.x, G.values));
  out.series.push_back(series("envelope_ratio", "x", "ratio", m.x, ratio));
  out.tables.push_back(columns_table("green", {"x", "G", "envelope_ratio"}, {G.x, G.values, ratio}));
  return out;
}

RunOutput do_dirichlet(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  const auto m = interval_mesh(g);
  const auto r = dirichlet_W(p, m, g.num("h0"), g.num("h1"));
  RunOutput out;
  const double left = r.ratio(0), right = r.ratio(r.ratio.size() - 1);
  out.report["ratio_left"] = left;
  out.report["ratio_right"] = right;
  out.report["nodes"] = m.size();
  out.ok = std::isfinite(left) && std::isfinite(right);
  out.columns = {{"ratio_left", left}, {"ratio_right", right}};
  out.series.push_back(series("solution", "x", "u", r.u.x, r.u.values));
  out.series.push_back(series("w_ratio", "x", "u_over_W", r.u.x, r.ratio));
  out.tables.push_back(columns_table("dirichlet", {"x", "u", "u_over_W"}, {r.u.x, r.u.values, r.ratio}));
  return out;
}

RunOutput do_hardy(const Params&, const Getter& g, std::uint64_t, std::optional<double> tol) {
  const auto m = interval_mesh(g);
  const auto r = hardy_constant_check(m);
  RunOutput out;
  out.report["hardy_constant"] = r.value;
  out.report["gap"] = r.gap;
  out.report["nodes"] = m.size();
  out.ok = r.value >= 0.25 - tol.value_or(1e-3);
  out.columns = {{"hardy_constant", r.value}, {"gap", r.gap}};
  return out;
}

RunOutput do_kernel_eval(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  const auto cfg = kernel_config(p, g);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.N);
  if (g.text("x").empty()) x(p.N - 1) = 1.0;
  else x = point_arg(g, p.N, "x");
  const double v = poisson_kernel(cfg, x);
  const auto fit = homogeneity_degree(cfg, {x}, g.list("scales"));
  const double target = 2.0 - p.N - derive_exponents(p).boundary_exponent();
  RunOutput out;
  out.report["x"] = vec(x);
  out.report["value"] = v;
  out.report["homogeneity_degree"] = fit.slope;
  out.report["target_degree"] = target;
  out.ok = std::abs(fit.slope - target) <= 1e-6;
  out.columns = {{"value", v}, {"homogeneity_degree", fit.slope}, {"target_degree", target}};
  return out;
}

RunOutput do_kernel_residual(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  const auto cfg = kernel_config(p, g);
  Box box{Eigen::VectorXd::Constant(p.N, -0.5), Eigen::VectorXd::Constant(p.N, 0.5)};
  box.lo(p.N - 1) = 0.5;
  box.hi(p.N - 1) = 1.5;
  const auto hs = g.list("spacing");
  if (hs.size() < 2) throw DomainError("need at least two spacings");
  std::vector<double> res, orders;
  for (double h : hs) res.push_back(harmonicity_residual(cfg, box, h));
  bool ok = true;
  for (std::size_t i = 1; i < hs.size(); ++i) {
    orders.push_back(std::log(res[i - 1] / res[i]) / std::log(hs[i - 1] / hs[i]));
    ok = ok && std::abs(orders.back() - 2.0) <= 0.2;
  }
  RunOutput out;
  out.report["spacing"] = vec(hs);
  out.report["residual"] = vec(res);
  out.report["order"] = vec(orders);
  out.ok = ok;
  out.columns = {{"finest_residual", res.back()}, {"last_order", orders.back()}};
  return out;
}

RunOutput do_marcinkiewicz(const Params& p, const Getter& g, std::uint64_t seed, std::optional<double> tol) {
  const auto cfg = kernel_config(p, g);
  MonteCarloSpec mc;
  mc.samples = static_cast<std::int64_t>(g.num("samples"));
  mc.strata = g.integer("strata");
  mc.inner_radius = g.num("inner");
  mc.outer_radius = g.num("outer");
  mc.seed = seed;
  std::vector<double> s = g.list("s");
  if (s.empty())
    for (int i = 0; i <= 8; ++i) s.push_back(std::pow(10.0, 1 + 0.25 * i));
  const auto r = marcinkiewicz_decay(cfg, s, mc);
  RunOutput out;
  out.report["s"] = vec(r.s);
  out.report["measure"] = vec(r.measure);
  out.report["ci"] = vec(r.ci);
  out.report["slope"] = r.slope;
  out.report["target"] = r.target;
  out.report["max_relative_ci"] = r.max_relative_ci;
  out.report["seed"] = r.seed;
  out.report["samples"] = r.samples;
  const double rel = std::abs(r.slope / r.target - 1);
  out.report["relative_slope_error"] = rel;
  out.ok = rel <= tol.value_or(0.05) && r.max_relative_ci <= 0.05;
  out.columns = {{"slope", r.slope}, {"target", r.target}, {"max_relative_ci", r.max_relative_ci}};
  Eigen::VectorXd ls(r.s.size()), lm(r.s.size());
  for (std::size_t i = 0; i < r.s.size(); ++i) {
    ls(i) = std::log10(r.s[i]);
    lm(i) = std::log10(r.measure[i]);
  }
  out.series.push_back(series("level_sets", "log10_s", "log10_measure", ls, lm));
  const auto col = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval(); };
  out.tables.push_back(columns_table("level_sets", {"s", "measure", "ci"}, {col(r.s), col(r.measure), col(r.ci)}));
  return out;
}

RunOutput do_integrability(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  const auto cfg = kernel_config(p, g);
  const auto r = kernel_Lq_integrability(cfg, p.power(), g.integer("levels"), g.num("margin"));
  RunOutput out;
  out.report["verdict"] = to_string(r.verdict);
  out.report["fitted_exponent"] = r.fitted_exponent;
  out.report["predicted_exponent"] = r.predicted_exponent;
  out.report["radius"] = vec(r.radius);
  out.report["cumulative"] = vec(r.cumulative);
  const bool expect_finite = subcritical(p);
  out.report["expected"] = expect_finite ? "finite" : "divergent";
  out.ok = r.verdict == Finiteness::Inconclusive || (r.verdict == Finiteness::Finite) == expect_finite;
  out.columns = {{"finite", r.verdict == Finiteness::Finite ? 1.0 : r.verdict == Finiteness::Divergent ? 0.0 : NAN},
                 {"fitted_exponent", r.fitted_exponent},
                 {"predicted_exponent", r.predicted_exponent}};
  return out;
}

RunOutput do_dirac(const Params& p, const Getter& g, std::uint64_t, std::optional<double> tol) {
  const auto mesh = make_polar_mesh(g.num("rin"), g.num("rho"), g.integer("angles"));
  DiracOptions o;
  const std::string method = g.text("method");
  if (method == "monotone") o.method = Method::MonotoneTruncation;
  else if (method != "newton") throw DomainError("method must be newton or monotone");
  o.cross_validate = g.integer("cross") != 0;
  if (tol) o.tol = *tol;
  const auto r = solve_dirac(p, mesh, g.num("k"), o);
  RunOutput out;
  out.report = solve_report_json(r.report);
  out.ok = r.report.converged && r.report.bracket_ok;
  out.columns = {{"weak_ratio_min", r.report.weak_ratio_min},
                 {"weak_ratio_max", r.report.weak_ratio_max},
                 {"iterations", double(r.report.iterations)},
                 {"weak_ok", double(r.report.weak_ok())},
                 {"strong_ok", double(r.report.strong_ok())}};
  add_profiles(out, r.report);
  return out;
}

RunOutput do_strong(const Params& p, const Getter& g, std::uint64_t, std::optional<double> tol) {
  const auto mesh = make_polar_mesh(g.num("rin"), g.num("rho"), g.integer("angles"));
  LadderOptions o;
  for (double k = 1; k <= g.num("kmax") * (1 + 1e-12); k *= 4) o.ladder.push_back(k);
  if (tol) o.dirac.tol = *tol;
  const auto r = solve_strong_singularity(p, mesh, o);
  RunOutput out;
  out.report = solve_report_json(r.report);
  out.ok = r.report.converged && r.report.selected_k.has_value() && r.report.strong_ok();
  out.columns = {{"selected_k", r.report.selected_k.value_or(NAN)},
                 {"profile_distance", r.report.profile_distance.value_or(NAN)},
                 {"top_rung_distance", r.report.top_rung_distance.value_or(NAN)},
                 {"apriori_constant", r.report.apriori_constant.value_or(NAN)}};
  add_profiles(out, r.report);
  return out;
}

RunOutput do_maximal(const Params& p, const Getter& g, std::uint64_t, std::optional<double> tol) {
  MaximalOptions o;
  o.readout = g.num("readout");
  o.data = g.num("data");
  o.x_cells = g.integer("xcells");
  o.grading = g.num("grading");
  const auto r = solve_maximal(p, o);
  RunOutput out;
  Json levels = Json::array();
  for (const auto& l : r.levels)
    levels.push_back({{"delta", l.delta}, {"trace", l.trace}, {"ko_constant", l.ko_constant},
                      {"iterations", l.iterations}, {"unknowns", l.unknowns}});
  out.report["levels"] = levels;
  out.report["extrapolated"] = r.extrapolated;
  out.report["target"] = r.target;
  out.report["relative_error"] = r.relative_error;
  out.report["saturation"] = r.saturation;
  out.report["stable"] = r.stable;
  out.report["warnings"] = r.warnings;
  out.ok = r.relative_error <= tol.value_or(0.05) && r.stable && r.saturation < 0.01;
  out.columns = {{"extrapolated", r.extrapolated}, {"target", r.target}, {"relative_error", r.relative_error},
                 {"saturation", r.saturation}};
  Eigen::VectorXd d(r.levels.size()), t(r.levels.size());
  for (std::size_t i = 0; i < r.levels.size(); ++i) {
    d(i) = r.levels[i].delta;
    t(i) = r.levels[i].trace;
  }
  out.series.push_back(series("trace_vs_delta", "delta", "trace", d, t));
  return out;
}

RunOutput do_barrier_eval(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  auto b = barrier_spec(p, g);
  b.Lambda = g.num("Lambda");
  const auto x = point_arg(g, p.N, "x");
  RunOutput out;
  out.report["x"] = vec(x);
  out.report["value"] = barrier_eval(b, x);
  out.columns = {{"value", out.report["value"].get<double>()}};
  return out;
}

RunOutput do_barrier_threshold(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  const auto b = barrier_spec(p, g);
  const auto t = lambda_threshold(b, FlatGrid{g.integer("grid")});
  const auto pw = threshold_powers(b);
  RunOutput out;
  out.report["lambda_min"] = t.lambda_min;
  out.report["threshold"] = t.threshold;
  out.report["constant"] = t.constant;
  out.report["powers"] = {pw[0], pw[1]};
  out.columns = {{"lambda_min", t.lambda_min}, {"threshold", t.threshold}, {"constant", t.constant}};
  return out;
}

RunOutput do_barrier_certify(const Params& p, const Getter& g, std::uint64_t, std::optional<double>) {
  auto b = barrier_spec(p, g);
  const FlatGrid grid{g.integer("grid")};
  const auto t = lambda_threshold(b, grid);
  b.Lambda = g.num("factor") * t.threshold;
  const auto r = supersolution_residual(b, grid);
  std::vector<double> ladder;
  bool monotone = true;
  for (double f : {1.0, 2.0, 4.0, 8.0}) {
    b.Lambda = f * t.threshold;
    ladder.push_back(supersolution_residual(b, grid).min_normalized);
    if (ladder.size() > 1 && ladder.back() < ladder[ladder.size() - 2]) monotone = false;
  }
  RunOutput out;
  out.report["threshold"] = t.threshold;
  out.report["lambda"] = g.num("factor") * t.threshold;
  out.report["min_residual"] = r.min_residual;
  out.report["min_normalized"] = r.min_normalized;
  out.report["argmin"] = {r.argmin_rho, r.argmin_y};
  out.report["argmin_near_boundary"] = r.argmin_near_boundary;
  out.report["points"] = r.points;
  out.report["ladder_factors"] = {1.0, 2.0, 4.0, 8.0};
  out.report["ladder_min_normalized"] = vec(ladder);
  out.report["ladder_monotone"] = monotone;
  out.ok = r.min_residual >= 0 && monotone;
  out.columns = {{"threshold", t.threshold}, {"min_residual", r.min_residual}, {"ladder_monotone", double(monotone)}};
  return out;
}

using Body = RunOutput (*)(const Params&, const Getter&, std::uint64_t, std::optional<double>);

Body body_of(const std::string& name) {
  static const std::map<std::string, Body> table = {
      {"exponents", do_exponents},
      {"admissible", do_admissible},
      {"omega", do_omega},
      {"linear1d-eigen", do_eigen},
      {"linear1d-green", do_green},
      {"linear1d-dirichlet", do_dirichlet},
      {"linear1d-hardy-const", do_hardy},
      {"kernel-eval", do_kernel_eval},
      {"kernel-residual", do_kernel_residual},
      {"kernel-marcinkiewicz", do_marcinkiewicz},
      {"kernel-integrability", do_integrability},
      {"bvp-dirac", do_dirac},
      {"bvp-strong", do_strong},
      {"bvp-maximal", do_maximal},
      {"barrier-eval", do_barrier_eval},
      {"barrier-threshold", do_barrier_threshold},
      {"barrier-certify", do_barrier_certify},
  };
  return table.at(name);
}

// ---- artifact writing ---------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string series_text(const Series& s) {
  std::string t = "# " + s.xlabel + " " + s.ylabel + "\n";
  for (std::size_t i = 0; i < s.x.size(); ++i) t += format_double(s.x[i]) + " " + format_double(s.y[i]) + "\n";
  return t;
}

std::string table_text(const Table& t) {
  std::string s;
  for (std::size_t i = 0; i < t.header.size(); ++i) s += (i ? "," : "") + t.header[i];
  s += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + format_double(row[i]);
    s += "\n";
  }
  return s;
}

std::string stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%04zu", index);
  return buf;
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Outcome {
  Point point;
  RunOutput out;
  std::string error;
};

Json point_json(const Point& p) {
  Json j;
  j["N"] = p.N;
  j["kappa"] = p.kappa;
  j["q"] = opt(p.q);
  return j;
}

void write_artifacts(const fs::path& dir, const std::string& command, const std::vector<Outcome>& runs,
                     const Json& metadata) {
  fs::create_directories(dir / "runs");
  std::vector<std::string> names;
  for (const auto& r : runs)
    for (const auto& c : r.out.columns)
      if (std::find(names.begin(), names.end(), c.first) == names.end()) names.push_back(c.first);
  std::string csv = "index,N,kappa,q,ok";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    Json doc;
    doc["index"] = i;
    doc["command"] = command;
    doc["params"] = point_json(r.point);
    doc["ok"] = r.error.empty() && r.out.ok;
    if (!r.error.empty()) doc["error"] = r.error;
    doc["result"] = r.out.report;
    write_text(dir / "runs" / (stem(i) + ".json"), doc.dump(2) + "\n");

    csv += std::to_string(i) + "," + std::to_string(r.point.N) + "," + format_double(r.point.kappa) + "," +
           (r.point.q ? format_double(*r.point.q) : std::string()) + "," + (doc["ok"].get<bool>() ? "1" : "0");
    for (const auto& n : names) {
      auto it = std::find_if(r.out.columns.begin(), r.out.columns.end(), [&](const auto& c) { return c.first == n; });
      csv += ",";
      if (it != r.out.columns.end() && std::isfinite(it->second)) csv += format_double(it->second);
    }
    csv += "\n";
    if (!r.out.series.empty()) fs::create_directories(dir / "plots");
    for (const auto& s : r.out.series) write_text(dir / "plots" / (stem(i) + "_" + s.name + ".dat"), series_text(s));
    if (!r.out.tables.empty()) fs::create_directories(dir / "tables");
    for (const auto& t : r.out.tables) write_text(dir / "tables" / (stem(i) + "_" + t.name + ".csv"), table_text(t));
  }
  write_text(dir / "summary.csv", csv);
  if (command == "exponents") {
    // critical exponent against kappa, one row per distinct (N, kappa)
    std::map<std::pair<int, double>, double> curve;
    for (const auto& r : runs)
      if (r.error.empty()) curve[{r.point.N, r.point.kappa}] = derive_exponents(make_params(r.point.N, r.point.kappa)).critical_q;
    std::map<int, Series> byN;
    for (const auto& [key, qc] : curve) {
      auto& s = byN[key.first];
      s.name = "critical_q_N" + std::to_string(key.first);
      s.xlabel = "kappa";
      s.ylabel = "critical_q";
      s.x.push_back(key.second);
      s.y.push_back(qc);
    }
    if (!byN.empty()) fs::create_directories(dir / "plots");
    for (const auto& [n, s] : byN) write_text(dir / "plots" / (s.name + ".dat"), series_text(s));
  }
  write_text(dir / "metadata.json", metadata.dump(2) + "\n");
}

Outcome execute(const std::string& command, const Point& pt, const Options& opt, std::uint64_t seed,
                std::optional<double> tol) {
  Outcome o;
  o.point = pt;
  try {
    o.out = run_point(command, pt, opt, seed, tol);
  } catch (const std::exception& e) {
    o.error = e.what();
    o.out.ok = false;
  }
  return o;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : specs()) v.push_back(s.name);
    return v;
  }();
  return names;
}

bool needs_power(const std::string& command) { return spec_of(command).power; }

RunOutput run_point(const std::string& command, const Point& pt, const Options& opt, std::uint64_t seed,
                    std::optional<double> tol) {
  const auto& spec = spec_of(command);
  if (spec.power && !pt.q) throw DomainError(command + " needs q");
  const Params p = make_params(pt.N, pt.kappa, pt.q);
  const Getter g(spec, opt);
  RunOutput out = body_of(command)(p, g, seed, tol);
  Json wrapped;
  wrapped["params"] = params_json(p);
  wrapped["options"] = g.echo();
  if (tol) wrapped["tol"] = *tol;
  for (auto& [k, v] : out.report.items()) wrapped[k] = v;
  out.report = std::move(wrapped);
  return out;
}

int run_sweep(const Manifest& m, std::ostream& log) {
  // validation before anything runs
  std::vector<Point> grid;
  try {
    if (m.command.empty()) throw DomainError("manifest has no command");
    const auto& spec = spec_of(m.command);
    const Getter check(spec, m.options);
    (void)check;
    std::vector<std::optional<double>> qs;
    for (double q : m.q) qs.emplace_back(q);
    if (qs.empty()) {
      if (spec.power && !m.N.empty() && !m.kappa.empty()) throw DomainError(m.command + " needs q values");
      qs.emplace_back(std::nullopt);
    }
    for (int N : m.N)
      for (double k : m.kappa)
        for (const auto& q : qs) {
          make_params(N, k, q);
          grid.push_back({N, k, q});
        }
  } catch (const DomainError& e) {
    log << "validation failure: " << e.what() << "\n";
    return ValidationFailure;
  }
  if (grid.empty()) {
    if (!m.out.empty()) fs::create_directories(m.out);
    return Ok;
  }

  const auto started = now_iso();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Outcome> runs(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < grid.size();) runs[i] = execute(m.command, grid[i], m.options, m.seed, m.tol);
  };
  const int jobs = std::max(1, std::min<int>(m.jobs, static_cast<int>(grid.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t failed = 0;
  for (const auto& r : runs)
    if (!r.error.empty() || !r.out.ok) ++failed;
  if (!m.out.empty()) {
    Json meta;
    meta["started"] = started;
    meta["finished"] = now_iso();
    meta["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    meta["jobs"] = jobs;
    meta["runs"] = runs.size();
    meta["failed"] = failed;
    write_artifacts(m.out, m.command, runs, meta);
  }
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (!runs[i].error.empty()) log << stem(i) << ": " << runs[i].error << "\n";
  log << runs.size() - failed << "/" << runs.size() << " runs met tolerances\n";
  return failed ? PartialFailure : Ok;
}

int main(int argc, char** argv) {
  CLI::App app{"Boundary singularities of -Lu - kappa u/d^2 + |u|^{q-1}u = 0"};
  app.require_subcommand(1);
  std::string out_dir;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  app.add_option("--out", out_dir, "artifact directory");
  app.add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tol", tol, "tolerance override");
  app.fallthrough();

  struct Leaf {
    std::string command;
    CLI::App* app;
    int N = 2;
    double kappa = 0.25;
    std::optional<double> q;
    Options values;
  };
  std::vector<std::unique_ptr<Leaf>> leaves;
  std::map<std::string, CLI::App*> groups;
  for (const auto& spec : specs()) {
    CLI::App* parent = &app;
    std::string leaf_name = spec.name;
    if (const auto dash = spec.name.find('-'); dash != std::string::npos) {
      const std::string group = spec.name.substr(0, dash);
      if (!groups.count(group)) {
        groups[group] = app.add_subcommand(group, group + " operations");
        groups[group]->require_subcommand(1);
        groups[group]->fallthrough();
      }
      parent = groups[group];
      leaf_name = spec.name.substr(dash + 1);
    }
    auto leaf = std::make_unique<Leaf>();
    leaf->command = spec.name;
    leaf->app = parent->add_subcommand(leaf_name, spec.help);
    leaf->app->fallthrough();
    leaf->app->add_option("--N", leaf->N, "dimension");
    leaf->app->add_option("--kappa", leaf->kappa, "potential strength in (0, 1/4]");
    auto* qopt = leaf->app->add_option("--q", leaf->q, "absorption power");
    if (spec.power) qopt->required();
    for (const auto& [name, def] : spec.options) {
      auto* o = leaf->app->add_option("--" + name, leaf->values[name], "default " + (def.empty() ? std::string("none") : def));
      (void)o;
      leaf->values[name] = def;
    }
    leaves.push_back(std::move(leaf));
  }
  std::string manifest_path;
  auto* sweep = app.add_subcommand("sweep", "run a manifest over a parameter grid");
  sweep->add_option("manifest", manifest_path, "manifest file")->required();
  sweep->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : ValidationFailure;
  }

  try {
    if (sweep->parsed()) {
      Manifest m = load_manifest(manifest_path);
      if (!out_dir.empty()) m.out = out_dir;
      if (seed) m.seed = *seed;
      if (tol) m.tol = tol;
      if (app.count("--jobs")) m.jobs = jobs;
      return run_sweep(m, std::cerr);
    }
    for (const auto& leaf : leaves) {
      if (!leaf->app->parsed()) continue;
      const Point pt{leaf->N, leaf->kappa, leaf->q};
      Options given;
      for (const auto& [name, def] : spec_of(leaf->command).options)
        if (leaf->values[name] != def) given[name] = leaf->values[name];
      const std::uint64_t s = seed.value_or(20240611);
      RunOutput out = run_point(leaf->command, pt, given, s, tol);
      std::cout << out.report.dump(2) << "\n";
      if (!out_dir.empty()) {
        Json meta;
        meta["finished"] = now_iso();
        meta["runs"] = 1;
        write_artifacts(out_dir, leaf->command, {Outcome{pt, out, {}}}, meta);
      }
      return out.ok ? Ok : PartialFailure;
    }
  } catch (const DomainError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return ValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Failure;
  }
  return Failure;
}

}  // namespace hardy::cli
