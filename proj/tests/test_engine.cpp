#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "mvjump/errors.hpp"
#include "mvjump/io.hpp"
#include "mvjump/models.hpp"
#include "mvjump/oracle.hpp"
#include "mvjump/particle_engine.hpp"
#include "support.hpp"

using namespace mvjump;

namespace {

SimConfig config_for(const ModelChoice& choice, double T, double step, std::size_t M,
                     std::size_t N, std::uint64_t seed) {
  ModelBundle b = make_model(choice);
  SimConfig c;
  c.levy = b.levy;
  c.coeffs = b.coeffs;
  c.partition = Partition::uniform(T, step);
  c.M = M;
  c.N = N;
  c.seed = seed;
  c.initial = InitialLaw::point(Vec(b.levy->dimension(), 0.0));
  return c;
}

ModelChoice choice(const std::string& measure, const std::string& drift, const std::string& jump,
                   ParamMap drift_params = {}, ParamMap jump_params = {}) {
  ModelChoice c;
  c.measure = measure;
  c.drift = drift;
  c.jump = jump;
  c.drift_params = std::move(drift_params);
  c.jump_params = std::move(jump_params);
  return c;
}

Positions final_positions(const SimConfig& c) {
  return run_simulation(c, {c.horizon()}).snapshots.begin()->second;
}

}  // namespace

TEST_CASE("partition construction") {
  const auto p = Partition::uniform(1.0, 0.01);
  CHECK(p.steps() == 100);
  CHECK(p.times().back() == 1.0);
  CHECK(p.max_step() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(Partition::uniform(1.0, 0.3).steps() == 4);
  CHECK(Partition::uniform(0.0, 0.1).steps() == 0);
  const auto r = Partition::uniform_steps(1.0, 13, 3);
  CHECK(r.steps() == 104);
  CHECK(r.uniform_step() * 8.0 == 1.0 / 13.0);
  CHECK_FALSE(r.index_of(0.3).has_value());
  CHECK(r.index_of(52.0 / 104.0).value() == 52);
  CHECK_THROWS_AS(Partition::explicit_grid({0.0, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(Partition::explicit_grid({0.1, 0.5}), ConfigError);
  CHECK_THROWS_AS(Partition::uniform(1.0, 2.0), ConfigError);
}

TEST_CASE("zero tail and point law start every particle at the point") {
  auto c = config_for(choice("lebesgue", "zero", "kac"), 1.0, 0.1, 3, 100, 1);
  c.initial = InitialLaw::point({2.5});
  const auto s = init_system(c);
  CHECK(s.tail_sigma == 0.0);
  for (std::size_t i = 0; i < 100; ++i) CHECK(s.positions.row(i)[0] == 2.5);
}

TEST_CASE("gaussian replacement of the tail has variance a^2") {
  auto c = config_for(choice("example1-exp", "zero", "zero"), 1.0, 0.1, 5, 100000, 3);
  const auto s = init_system(c);
  CHECK(s.tail_sigma == doctest::Approx(std::exp(-5.0)).epsilon(1e-6));
  const auto m = testing::moments(s.positions.column(0));
  CHECK(std::fabs(m.variance - std::exp(-10.0)) < 3 * std::sqrt(2.0 / 1e5) * std::exp(-10.0));
  CHECK(init_system(c).positions == s.positions);
}

TEST_CASE("initial sample file must have N rows") {
  auto c = config_for(choice("lebesgue", "zero", "zero"), 1.0, 0.1, 1, 4, 1);
  c.initial = InitialLaw::samples(Positions(3, 1, {1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(init_system(c), ConfigError);
  c.N = 3;
  CHECK(init_system(c).positions.row(2)[0] == 3.0);
}

TEST_CASE("explicit euler step for the drift") {
  auto c = config_for(choice("lebesgue", "linear", "zero", {{"B", -1.0}}), 0.25, 0.25, 1, 1, 1);
  c.initial = InitialLaw::point({1.0});
  CHECK(final_positions(c).row(0)[0] == 0.75);

  // one step reproduces x + (A mean + B x) dt exactly
  auto lin = config_for(choice("lebesgue", "linear", "zero", {{"A", 0.5}, {"B", -2.0}}), 0.1, 0.1, 1, 3, 1);
  lin.initial = InitialLaw::samples(Positions(3, 1, {1.0, -2.0, 4.0}));
  const auto out = final_positions(lin);
  const double mean = 1.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double x = lin.initial.rows().row(i)[0];
    CHECK(out.row(i)[0] == x + (0.5 * mean - 2.0 * x) * 0.1);
  }
}

TEST_CASE("jumps add up with frozen arguments") {
  for (const std::string jump : {"constant", "own-position"}) {
    CAPTURE(jump);
    auto c = config_for(choice("lebesgue", "zero", jump), 0.5, 0.5, 3, 2000, 17);
    c.initial = InitialLaw::point({1.0});
    auto state = init_system(c);
    const auto events = next_step_events(state, c);
    step_system(state, events, c);
    std::size_t with_three = 0, with_two = 0;
    for (std::size_t i = 0; i < c.N; ++i) {
      const double n = static_cast<double>(events.count(i));
      with_three += events.count(i) == 3;
      with_two += events.count(i) == 2;
      // constant c = 1: x + n.  c = own frozen position: x + n * x.
      CHECK(state.positions.row(i)[0] == 1.0 + n);
    }
    CHECK(with_three > 0);
    CHECK(with_two > 0);
    CHECK(state.time == 0.5);
  }
}

TEST_CASE("zero horizon returns the initial state") {
  auto c = config_for(choice("lebesgue", "zero", "kac"), 0.0, 0.1, 3, 10, 1);
  c.partition = Partition::uniform(0.0, 0.1);
  c.initial = InitialLaw::gaussian({0.0}, {1.0});
  const auto r = run_simulation(c, {0.0});
  CHECK(r.total_events == 0);
  CHECK(r.snapshots.at(0.0) == init_system(c).positions);
}

TEST_CASE("record times must be grid points") {
  auto c = config_for(choice("lebesgue", "zero", "zero"), 1.0, 0.25, 1, 2, 1);
  CHECK_THROWS_AS(run_simulation(c, {0.3}), ConfigError);
  CHECK(run_simulation(c, {0.0, 0.5, 1.0}).snapshots.size() == 3);
}

TEST_CASE("kac interaction conserves the mean") {
  auto c = config_for(choice("lebesgue", "zero", "kac"), 1.0, 0.01, 3, 10000, 5);
  c.initial = InitialLaw::gaussian({1.0}, {1.0});
  const auto r = run_simulation(c, {0.0, 1.0});
  const auto m0 = testing::moments(r.snapshots.at(0.0).column(0));
  const auto m1 = testing::moments(r.snapshots.at(1.0).column(0));
  CHECK(std::fabs(m1.mean - m0.mean) <= 3 * std::sqrt(m1.variance / 1e4));
  CHECK(r.total_events > 0);
}

TEST_CASE("state-independent jumps match the compound Poisson oracle") {
  auto c = config_for(choice("lebesgue", "zero", "state-independent"), 1.0, 0.1, 5, 100000, 8);
  const auto x = final_positions(c).column(0);
  const auto m = testing::moments(x);
  auto gamma = [](Point z) { return std::exp(-std::fabs(z[0])); };
  const auto [mean, var] = oracle::compound_poisson_moments(*c.levy, gamma, 5, 1.0, 0.0, 0.0);
  CHECK(mean.value == doctest::Approx(2.0 * (1.0 - std::exp(-5.0))).epsilon(1e-9));
  CHECK(std::fabs(m.mean - mean.value) < 3 * m.std_error());
  // variance of the sample variance: (mu4 - var^2) / n
  double mu4 = 0.0;
  for (double v : x) mu4 += std::pow(v - m.mean, 4);
  mu4 /= static_cast<double>(x.size());
  CHECK(std::fabs(m.variance - var.value) < 4 * std::sqrt((mu4 - m.variance * m.variance) / 1e5));
}

TEST_CASE("mean-field drift matches the moment ODE") {
  auto c = config_for(choice("lebesgue", "mean-reverting", "zero"), 1.0, 0.002, 1, 20000, 4);
  c.initial = InitialLaw::gaussian({0.5}, {1.0});
  const auto x = final_positions(c).column(0);
  const auto init = init_system(c).positions.column(0);
  const auto m0 = testing::moments(init);
  const auto m = testing::moments(x);
  const auto ode = oracle::meanfield_ode({1.0}, {-1.0}, 1.0, {m0.mean}, {m0.variance});
  CHECK(ode.cov[0] == doctest::Approx(m0.variance * std::exp(-2.0)).epsilon(1e-9));
  // Euler bias on the variance is about var * 2 dt; the ensemble is deterministic given X_0.
  CHECK(std::fabs(m.variance - ode.cov[0]) < 0.01 * ode.cov[0]);
  CHECK(m.mean == doctest::Approx(m0.mean).epsilon(1e-9));
}

TEST_CASE("results do not depend on the thread count") {
  auto c = config_for(choice("example1-exp", "mean-reverting", "kac"), 0.5, 0.05, 4, 3000, 21);
  c.initial = InitialLaw::gaussian({0.0}, {2.0});
  const auto one = final_positions(c);
  c.threads = 4;
  CHECK(final_positions(c) == one);
}

TEST_CASE("permuting stream labels permutes the output") {
  auto c = config_for(choice("lebesgue", "mean-reverting", "kac"), 0.5, 0.05, 3, 1500, 13);
  c.initial = InitialLaw::gaussian({0.0}, {1.0});
  // The ensemble mean is summed in slot order, so agreement is up to rounding.
  const auto base = final_positions(c);
  std::vector<std::uint64_t> labels(c.N);
  std::iota(labels.begin(), labels.end(), 0);
  std::reverse(labels.begin(), labels.end());
  std::swap(labels[0], labels[700]);
  c.labels = labels;
  const auto permuted = final_positions(c);
  for (std::size_t p = 0; p < c.N; ++p) CHECK(permuted.row(p)[0] == doctest::Approx(base.row(labels[p])[0]).epsilon(1e-12));
}

TEST_CASE("blow-up is reported with the particle") {
  auto c = config_for(choice("lebesgue", "zero", "zero"), 1.0, 1.0, 3, 50, 2);
  c.coeffs.jump = [](double, Point, Point, Point, const MeasureSummary&, MutPoint out) {
    out[0] = 1.7e308;
  };
  try {
    final_positions(c);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("particle") != std::string::npos);
  }
}

TEST_CASE("snapshot files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mvjump_engine_test";
  std::filesystem::create_directories(dir);
  Positions x(3, 2, {1.0 / 3.0, -2.5e-300, 7.0, 1e17 + 1, -0.0, 3.141592653589793});
  write_snapshot_csv(dir / "s.csv", x);
  CHECK(read_snapshot_csv(dir / "s.csv") == x);
  write_snapshot_binary(dir / "s.bin", x, 0.75);
  double t = 0.0;
  CHECK(read_snapshot_binary(dir / "s.bin", &t) == x);
  CHECK(t == 0.75);
  CHECK(std::filesystem::file_size(dir / "s.bin") == 40 + 6 * 8);
  CHECK_THROWS_AS(read_snapshot_binary(dir / "s.csv"), IoError);
  CHECK_THROWS_AS(read_snapshot_csv(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
