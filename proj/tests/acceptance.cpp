// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvjump/errors.hpp"
#include "mvjump/estimators.hpp"
#include "mvjump/metrics.hpp"
#include "mvjump/models.hpp"
#include "mvjump/oracle.hpp"
#include "mvjump/particle_engine.hpp"
#include "mvjump/scenario.hpp"
#include "mvjump/tail.hpp"

using namespace mvjump;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

struct Sample {
  double mean = 0.0, var = 0.0, m4 = 0.0;
};

Sample sample_moments(const Positions& x) {
  Sample s;
  const auto n = static_cast<double>(x.size());
  for (double v : x.data()) s.mean += v / n;
  for (double v : x.data()) {
    const double c = (v - s.mean) * (v - s.mean);
    s.var += c;
    s.m4 += c * c / n;
  }
  s.var /= n - 1.0;
  return s;
}

SimConfig config_for(const ModelBundle& b, Partition partition, std::size_t M, std::size_t N,
                     std::uint64_t seed, InitialLaw initial) {
  SimConfig c;
  c.levy = b.levy;
  c.coeffs = b.coeffs;
  c.partition = std::move(partition);
  c.M = M;
  c.N = N;
  c.seed = seed;
  c.initial = std::move(initial);
  return c;
}

ModelBundle kac_model() {
  ModelChoice ch;
  ch.measure = "lebesgue";
  ch.jump = "kac";
  return make_model(ch);
}

Verdict tail_closed_form() {
  const auto b = make_model({"example1-exp", {{"a1", 1}, {"a2", 2}, {"p_decay", 1}, {"d", 1}}});
  const auto q = tail_quantities(*b.levy, b.coeffs, 5, 1.0);
  const double ea = rel_err(q.a_M_T, std::exp(-5.0)), ee = rel_err(q.eps_M, 18.0 * std::exp(-5.0));
  return {ea <= 1e-6 && ee <= 1e-6,
          fmt("a_M_T=%.10g (rel %.1e), eps_M=%.10g (rel %.1e)", q.a_M_T, ea, q.eps_M, ee)};
}

Verdict compound_poisson() {
  ModelChoice ch;
  ch.jump = "state-independent";
  const auto b = make_model(ch);
  auto c = config_for(b, Partition::uniform(1.0, 0.01), 5, 100000, 2024, InitialLaw::point({0.0}));
  const auto run = run_simulation(c, {1.0});
  const auto& x = run.snapshots.at(1.0);
  const auto gamma = [](Point z) { return std::exp(-std::fabs(z[0])); };
  const auto [om, ov] = oracle::compound_poisson_moments(*b.levy, gamma, 5, 1.0, 0.0, 0.0, run.tail_sigma);
  const auto s = sample_moments(x);
  const double n = static_cast<double>(x.size());
  const double se_mean = std::sqrt(s.var / n), se_var = std::sqrt((s.m4 - s.var * s.var) / n);
  const double zm = std::fabs(s.mean - om.value) / se_mean, zv = std::fabs(s.var - ov.value) / se_var;
  return {zm <= 3.0 && zv <= 4.0, fmt("mean %.6f vs %.6f (%.2f SE), variance %.6f vs %.6f (%.2f SE)", s.mean,
                                      om.value, zm, s.var, ov.value, zv)};
}

Verdict mean_conservation() {
  ModelChoice ch;
  ch.measure = "example1-exp";
  ch.jump = "kac";
  const auto b = make_model(ch);
  int passed = 0;
  std::string zs;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto c = config_for(b, Partition::uniform(1.0, 0.01), 3, 10000, seed, InitialLaw::gaussian({1.0}, {1.0}));
    const auto r = run_simulation(c, {0.0, 1.0});
    const auto s0 = sample_moments(r.snapshots.at(0.0)), s1 = sample_moments(r.snapshots.at(1.0));
    const double z = std::fabs(s1.mean - s0.mean) / (std::sqrt(s1.var) / std::sqrt(10000.0));
    passed += z <= 3.0;
    zs += fmt("%s%.2f", zs.empty() ? "" : " ", z);
  }
  return {passed >= 9, fmt("%d/10 seeds within 3 sd/sqrt(N); z = %s", passed, zs.c_str())};
}

Verdict w1_self_convergence() {
  ScenarioConfig cfg;
  cfg.scenario = "convergence-study";
  cfg.seed = 100;
  cfg.model.measure = "lebesgue";
  cfg.model.jump = "kac";
  cfg.simulation.T = 1.0;
  cfg.simulation.step = 0.08;
  cfg.simulation.M = 3;
  cfg.simulation.N = 10000;
  cfg.simulation.initial = {"gaussian", {1.0}, {1.0}, ""};
  cfg.convergence.coarse_step = 0.08;
  cfg.convergence.levels = 4;
  cfg.convergence.seeds = 20;
  cfg.convergence.min_slope = 0.7;
  cfg.output_dir = (fs::temp_directory_path() / "mvjump_acceptance_w1").string();
  fs::remove_all(cfg.output_dir);
  const auto out = run_scenario(cfg);
  if (out.exit_code != kExitOk) return {false, "convergence-study failed: " + out.message};
  std::ifstream in(fs::path(cfg.output_dir) / "convergence.json");
  const auto j = nlohmann::json::parse(in);
  const auto ladder = j.at("ladder").get<std::vector<double>>();
  const auto errors = j.at("errors").get<std::vector<double>>();
  const double slope = j.at("slope").get<double>();
  fs::remove_all(cfg.output_dir);
  return {slope >= 0.7, fmt("slope %.3f (|P| = %.4f..%.4f, W1 %.4g -> %.4g, 20 seeds)", slope, ladder.front(),
                            ladder.back(), errors.front(), errors.back())};
}

Verdict kernel_bias_orders() {
  std::vector<std::pair<double, double>> plain, romberg;
  const double x[] = {0.0};
  const double truth = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (double delta : {0.4, 0.3, 0.2, 0.15}) {
    plain.emplace_back(delta, std::fabs(oracle::expected_kde_plain(x, 1.0, delta) - truth));
    romberg.emplace_back(delta, std::fabs(oracle::expected_kde_romberg(x, 1.0, delta) - truth));
  }
  const auto p = convergence_slope(plain, {2.0, 0.05, {}}, "density-plain bias");
  const auto r = convergence_slope(romberg, {4.0, 0.1, {}}, "density-romberg bias");
  return {p.pass && r.pass,
          fmt("plain slope %.4f (need 2 +- 0.05), Romberg slope %.4f (need 4 +- 0.1)", p.slope, r.slope)};
}

Verdict density_pipeline() {
  const double M = 5.0;
  ModelBundle b;
  b.levy = make_measure("lebesgue", {});
  b.coeffs.name = "pure-gaussian";
  b.coeffs.radial_envelopes = true;
  b.coeffs.clower = [M](Point z) {
    const double r = std::fabs(z[0]);
    return r > M ? 0.5 * std::exp(-(r - M)) : 0.0;
  };
  const auto q = tail_quantities(*b.levy, b.coeffs, 5, 1.0);
  const auto params = select_density_params(0.02, q.eps_M, 1, false);
  auto c = config_for(b, Partition::uniform(1.0, 0.02), 5, params.n_required, 77, InitialLaw::point({0.0}));
  const auto x = run_simulation(c, {1.0}).snapshots.at(1.0);
  Positions grid(161, 1);
  for (std::size_t g = 0; g < grid.size(); ++g) grid.row(g)[0] = -4.0 + 0.05 * static_cast<double>(g);
  const auto est = kde_estimate(x, grid, params.delta, false);
  const double zero[] = {0.0};
  const double n = static_cast<double>(params.n_required);
  double worst = 0.0, allowance = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double truth = oracle::gaussian_pdf(grid.row(g), zero, 1.0);
    worst = std::max(worst, std::fabs(est.values[g] - truth));
    const double bias = std::fabs(oracle::expected_kde_plain(grid.row(g), 1.0, params.delta) - truth);
    const double se = oracle::kernel_term_stddev(grid.row(g), 1.0, params.delta) / std::sqrt(n);
    allowance = std::max(allowance, bias + 3.0 * se);
  }
  const bool setup = std::fabs(q.a_M_T - 1.0) < 1e-8 && q.eps_M == 0.0 && params.n_required == 2500 &&
                     rel_err(params.delta, std::pow(0.02, 0.25)) < 1e-14;
  return {setup && worst <= 5.0 * allowance,
          fmt("a_M_T=%.9f delta=%.6f N=%zu: max|p-p_true|=%.4g <= 5*%.4g", q.a_M_T, params.delta,
              params.n_required, worst, allowance)};
}

Verdict weak_residual_ladder() {
  const auto b = kac_model();
  const double t = 0.5;
  const std::size_t coarse = 3;  // |P| = 1/6, 1/12, 1/24 on nested grids
  const std::size_t Ns[] = {2500, 5000, 10000};
  std::vector<WeakResidual> rungs;
  for (std::uint32_t j = 0; j < 3; ++j) {
    auto c = config_for(b, Partition::uniform_steps(t, coarse, j), 3, Ns[j], 700,
                        InitialLaw::gaussian({1.0}, {1.0}));
    WeakResidualPath path(b.levy, b.coeffs, 3, SmoothTestFunction::cosine(), 16, 701);
    run_simulation(c, {t}, [&](const ParticleSystemState& s) { path.observe(s); });
    rungs.push_back(path.result());
  }
  const bool decreasing = rungs[1].residual < rungs[0].residual && rungs[2].residual < rungs[1].residual;
  const bool final_ok = rungs[2].residual <= 3.0 * rungs[2].std_error;
  return {decreasing && final_ok,
          fmt("residual %.5f (SE %.5f), %.5f (SE %.5f), %.5f (SE %.5f); decreasing=%s, final <= 3 SE=%s",
              rungs[0].residual, rungs[0].std_error, rungs[1].residual, rungs[1].std_error, rungs[2].residual,
              rungs[2].std_error, decreasing ? "yes" : "no", final_ok ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict thread_independence() {
  const fs::path root = fs::temp_directory_path() / "mvjump_acceptance_threads";
  fs::remove_all(root);
  fs::create_directories(root);
  const char* base = R"({"schema_version": 1, "scenario": "%s", "seed": 9,
    "model": {"measure": "example1-exp", "jump": "kac"},
    "simulation": {"T": 1, "step": 0.05, "M": 3, "N": 20000, "snapshot_format": "both",
                   "initial": {"kind": "gaussian", "mean": [1], "cov": [1]}, "record_times": [0.5, 1]},
    "estimator": {"particles": 20000, "repetitions": 2, "gauss_budget": 256},
    "convergence": {"coarse_step": 0.25, "levels": 4, "seeds": 2}})";
  std::size_t compared = 0;
  for (const char* scenario : {"simulate", "density", "tv-estimate", "convergence-study"}) {
    const fs::path cfg = root / (std::string(scenario) + ".json");
    std::ofstream(cfg) << fmt(base, scenario);
    for (int threads : {1, 8}) {
      const fs::path out = root / (std::string(scenario) + "_" + std::to_string(threads));
      const std::string cmd = std::string("\"") + MVJUMP_CLI + "\" --config \"" + cfg.string() + "\" --threads " +
                              std::to_string(threads) + " --out \"" + out.string() + "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, std::string("CLI failed for ") + scenario};
    }
    const fs::path a = root / (std::string(scenario) + "_1"), b = root / (std::string(scenario) + "_8");
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      if (name == "manifest.json") continue;
      if (!fs::exists(b / name) || slurp(a / name) != slurp(b / name)) {
        return {false, fmt("%s/%s differs between --threads 1 and 8", scenario, name.string().c_str())};
      }
      ++compared;
    }
  }
  fs::remove_all(root);
  return {compared >= 8, fmt("%zu output files byte-identical across 4 scenarios", compared)};
}

Verdict rule_arithmetic() {
  const auto dp = select_density_params(0.01, 1e-4, 1, false);
  const auto tp = select_tv_params(5e-4, 5e-4, 1, 0.5, false);
  const auto tr = select_tv_params(5e-4, 5e-4, 1, 0.5, true);
  const double e1 = rel_err(dp.delta, std::exp(0.25 * std::log(0.02)));
  const double e2 = rel_err(tp.delta, 0.1);
  const double e3 = rel_err(tr.delta, std::exp(-0.625 * std::log(10.0)));
  const bool digits = e1 < 5e-13 && e2 < 5e-13 && e3 < 5e-13;
  const bool spec_values = std::fabs(dp.delta - 0.376060) < 5e-7 && std::fabs(tr.delta - 0.237137) < 5e-7;
  const bool counts = dp.n_required == 2500 && tp.n_required == 10000000;
  return {digits && spec_values && counts,
          fmt("delta %.12f (N %zu), %.12f (N %zu), %.12f; rel errors %.1e %.1e %.1e", dp.delta, dp.n_required,
              tp.delta, tp.n_required, tr.delta, e1, e2, e3)};
}

Verdict theta_diagnostics() {
  const auto grid = default_theta_grid();
  const auto exp_model = make_model({"example1-exp", {{"a1", 1}, {"a2", 2}, {"p_decay", 1}, {"d", 1}}});
  const auto poly = make_model({"example1-poly", {}});
  const auto stable = make_model({"example2-alpha-stable", {}});
  const auto te = theta_lower_bound(*exp_model.levy, exp_model.coeffs, grid);
  const auto tp = theta_lower_bound(*poly.levy, poly.coeffs, grid);
  const auto ts = theta_lower_bound(*stable.levy, stable.coeffs, grid);
  const bool ok = !te.infinite && std::fabs(te.value - 0.5) <= 0.05 && tp.infinite && ts.infinite;
  return {ok, fmt("example1-exp theta=%.4f, example1-poly infinite=%s, example2 infinite=%s", te.value,
                  tp.infinite ? "yes" : "no", ts.infinite ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "tail-quantities", 1.0, tail_closed_form},
      {2, "compound-poisson-oracle", 60.0, compound_poisson},
      {3, "kac-mean-conservation", 120.0, mean_conservation},
      {4, "w1-self-convergence", 900.0, w1_self_convergence},
      {5, "kernel-bias-orders", 1.0, kernel_bias_orders},
      {6, "density-pipeline", 10.0, density_pipeline},
      {7, "weak-residual-ladder", 600.0, weak_residual_ladder},
      {8, "thread-independence", 60.0, thread_independence},
      {9, "rule-arithmetic", 1.0, rule_arithmetic},
      {10, "theta-diagnostics", 30.0, theta_diagnostics},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("%s %2d %-24s %s [%.2fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                in_time ? "" : fmt(" > budget %.0fs", c.budget_seconds).c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
