#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "mvjump/errors.hpp"
#include "mvjump/estimators.hpp"
#include "mvjump/oracle.hpp"
#include "mvjump/random.hpp"

using namespace mvjump;

namespace {

Positions gaussian_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
  Positions p(n, d);
  Stream s = StreamFamily(seed).stream({Purpose::Auxiliary, 0, 0, 0});
  for (double& v : p.data()) v = s.normal();
  return p;
}

Positions line_grid(double lo, double hi, std::size_t n) {
  Positions g(n, 1);
  for (std::size_t i = 0; i < n; ++i) g.row(i)[0] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("v_n rate") {
  CHECK(v_n(10000, 1) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(v_n(100, 2) == doctest::Approx(0.1 * std::log(101.0)).epsilon(1e-15));
  CHECK(v_n(100, 2) == doctest::Approx(0.461512).epsilon(1e-6));
  CHECK(v_n(1000, 3) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_THROWS_AS(v_n(0, 1), ConfigError);
}

TEST_CASE("minimum particle count is the smallest admissible N") {
  for (std::size_t d : {1, 2, 3, 5}) {
    for (double bound : {0.5, 0.1, 0.02, 3e-3}) {
      const std::size_t n = min_particles(bound, d);
      CHECK(v_n(n, d) <= bound * (1 + 1e-12));
      if (n > 1) CHECK(v_n(n - 1, d) > bound * (1 + 1e-12));
    }
  }
  // d = 2 rises up to N = 4: ln 2 = v_n(1) admits N = 1, anything smaller skips the hump
  CHECK(min_particles(0.7, 2) == 1);
  CHECK(min_particles(0.6, 2) > 4);
}

TEST_CASE("density rule arithmetic") {
  const auto p = select_density_params(0.01, 1e-4, 1, false);
  CHECK(p.base == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(p.delta == doctest::Approx(std::pow(0.02, 0.25)).epsilon(1e-14));
  CHECK(p.delta == doctest::Approx(0.376060).epsilon(1e-6));
  CHECK(p.n_required == 2500);
  CHECK(p.rule == Rule::DensityPlain);

  const auto r = select_density_params(0.01, 1e-4, 1, true);
  CHECK(r.delta == doctest::Approx(std::pow(0.02, 1.0 / 6.0)).epsilon(1e-14));
  CHECK(r.delta == doctest::Approx(0.521001).epsilon(1e-6));
  CHECK(r.n_required == 2500);

  CHECK(select_density_params(0.01, 1e-4, 3, false).n_required == 125000);
  CHECK(select_density_params(2.0, 0.0, 1, false).base_above_one);
  CHECK_THROWS_AS(select_density_params(0.0, 0.0, 1, false), ConfigError);
}

TEST_CASE("tv rule arithmetic") {
  const auto p = select_tv_params(5e-4, 5e-4, 1, 0.5, false);
  CHECK(p.delta == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(p.vn_bound == doctest::Approx(std::pow(10.0, -3.5)).epsilon(1e-12));
  CHECK(p.n_required == 10000000);

  const auto r = select_tv_params(5e-4, 5e-4, 1, 0.5, true);
  CHECK(r.delta == doctest::Approx(std::pow(10.0, -0.625)).epsilon(1e-12));
  CHECK(r.delta == doctest::Approx(0.237137).epsilon(1e-6));

  const auto limit = select_tv_params(5e-4, 5e-4, 1, 1e-9, false);
  CHECK(limit.delta == doctest::Approx(std::sqrt(1e-3)).epsilon(1e-8));
  CHECK_THROWS_AS(select_tv_params(5e-4, 5e-4, 1, 1.0, false), ConfigError);
  CHECK_THROWS_AS(parse_rule("kde-fast"), ConfigError);
  CHECK(parse_rule("tv-romberg") == Rule::TvRomberg);
}

TEST_CASE("kernel estimate at a point mass") {
  Positions at0(10, 1, 0.0);
  Positions x0(1, 1, 0.0);
  CHECK(kde_estimate(at0, x0, 1.0, false).values[0] == doctest::Approx(0.398942).epsilon(1e-6));
  const double delta = 0.5;
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double expected = 2.0 * c / (delta / std::sqrt(2.0)) - c / delta;
  CHECK(kde_estimate(at0, x0, delta, true).values[0] == doctest::Approx(expected).epsilon(1e-14));
  const double zero[] = {0.0};
  CHECK(gaussian_kernel(zero, 1.0) == doctest::Approx(c).epsilon(1e-15));
}

TEST_CASE("kernel estimate of a large normal sample") {
  const auto sample = gaussian_sample(1000000, 1, 11);
  Positions x0(1, 1, 0.0);
  const double est = kde_estimate(sample, x0, 0.5, false).values[0];
  const double zero[] = {0.0};
  const double mean = oracle::expected_kde_plain(zero, 1.0, 0.5);
  const double se = oracle::kernel_term_stddev(zero, 1.0, 0.5) / 1000.0;
  CHECK(mean == doctest::Approx(0.356825).epsilon(1e-6));
  CHECK(std::fabs(est - mean) < 4.0 * se);
}

TEST_CASE("plain estimate integrates to one") {
  const auto sample = gaussian_sample(1000, 1, 3);
  const auto grid = line_grid(-12.0, 12.0, 24001);
  const auto est = kde_estimate(sample, grid, 0.3, false);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) total += 0.5 * (est.values[i] + est.values[i + 1]) * 1e-3;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(est.negative_values == 0);
}

TEST_CASE("Romberg estimate combines two plain estimates") {
  const auto sample = gaussian_sample(500, 1, 5);
  const auto grid = line_grid(-4.0, 4.0, 81);
  const double delta = 0.4;
  const auto rom = kde_estimate(sample, grid, delta, true);
  const auto wide = kde_estimate(sample, grid, delta, false);
  const auto narrow = kde_estimate(sample, grid, delta / std::sqrt(2.0), false);
  for (std::size_t g = 0; g < grid.size(); ++g) CHECK(rom.values[g] == 2.0 * narrow.values[g] - wide.values[g]);
}

TEST_CASE("truncated kernel sums match the brute-force sum") {
  for (std::size_t d : {1, 2, 3}) {
    const auto sample = gaussian_sample(400, d, 17 + d);
    Positions grid = gaussian_sample(60, d, 99);
    for (double& v : grid.data()) v *= 1.5;
    // Absolute scale: the largest single kernel term.
    const double peak = std::pow(0.3 * std::sqrt(2.0 * std::numbers::pi), -static_cast<double>(d));
    for (bool romberg : {false, true}) {
      const auto est = kde_estimate(sample, grid, 0.3, romberg);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double ref = oracle::brute_force_kde(sample, grid.row(g), 0.3, romberg);
        CHECK(std::fabs(est.values[g] - ref) <= 1e-12 * peak);
      }
    }
  }
}

TEST_CASE("kernel estimate is thread independent") {
  const auto sample = gaussian_sample(3000, 2, 1);
  const auto grid = gaussian_sample(500, 2, 2);
  CHECK(kde_estimate(sample, grid, 0.2, true, 1).values == kde_estimate(sample, grid, 0.2, true, 4).values);
}

TEST_CASE("kernel bias has order two, Romberg order four") {
  // Bias of the estimator's expectation for N(0,1) particles, evaluated exactly.
  const double x[] = {0.4};
  auto slope = [&](bool romberg) {
    const double d1 = 0.1, d2 = 0.05;
    auto bias = [&](double d) {
      const double e = romberg ? oracle::expected_kde_romberg(x, 1.0, d) : oracle::expected_kde_plain(x, 1.0, d);
      const double zero[] = {0.0};
      return std::fabs(e - oracle::gaussian_pdf(x, zero, 1.0));
    };
    return std::log(bias(d1) / bias(d2)) / std::log(d1 / d2);
  };
  CHECK(slope(false) == doctest::Approx(2.0).epsilon(0.025));
  CHECK(slope(true) == doctest::Approx(4.0).epsilon(0.025));
}

TEST_CASE("density csv layout") {
  const auto sample = gaussian_sample(10, 1, 4);
  const auto est = kde_estimate(sample, line_grid(-1, 1, 3), 0.5, false);
  const auto path = std::filesystem::temp_directory_path() / "mvjump_density_test.csv";
  est.write_csv(path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "x1,value,method,delta,N");
  CHECK(row.rfind("-1,", 0) == 0);
  CHECK(row.find(",plain,0.5,10") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("smoothed expectations in closed form") {
  Positions at0(7, 1, 0.0);
  CHECK(smoothed_expectation(at0, TestFunction::constant(1.0), 0.3, false) == 1.0);
  CHECK(smoothed_expectation(at0, TestFunction::constant(1.0), 0.3, true) == 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(smoothed_expectation(at0, TestFunction::box({-inf}, {0.0}), 0.7, false) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(smoothed_expectation(at0, TestFunction::box({-inf}, {1.0}), 1.0, false) == doctest::Approx(0.841345).epsilon(1e-6));
  CHECK(smoothed_expectation(at0, TestFunction::box({-inf}, {1.0}), 1.0, false) == doctest::Approx(phi_cdf(1.0)).epsilon(1e-14));
}

TEST_CASE("smoothed box equals the integrated kernel estimate") {
  const auto sample = gaussian_sample(200, 1, 8);
  const double a = -0.5, b = 1.2, delta = 0.35;
  for (bool romberg : {false, true}) {
    const double smooth = smoothed_expectation(sample, TestFunction::box({a}, {b}), delta, romberg);
    // Composite Simpson on the estimate
    const std::size_t n = 4000;
    const auto grid = line_grid(a, b, n + 1);
    const auto est = kde_estimate(sample, grid, delta, romberg);
    const double h = (b - a) / static_cast<double>(n);
    double s = est.values.front() + est.values.back();
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * est.values[i];
    CHECK(smooth == doctest::Approx(s * h / 3.0).epsilon(1e-10));
  }
}

TEST_CASE("Monte Carlo smoothing") {
  const auto sample = gaussian_sample(50, 1, 9);
  const double delta = 0.4;
  auto cosine = TestFunction::general([](Point x) { return std::cos(x[0]); }, 1.0, "cos");
  double exact = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) exact += std::cos(sample.row(i)[0]);
  exact *= std::exp(-0.5 * delta * delta) / static_cast<double>(sample.size());
  SmoothingOptions mc;
  mc.gauss_budget = 20000;
  mc.seed = 4;
  CHECK(smoothed_expectation(sample, cosine, delta, false, mc) == doctest::Approx(exact).epsilon(5e-3));

  // Monte Carlo mode on a box agrees with the closed form
  mc.mode = SmoothingOptions::Mode::MonteCarlo;
  const auto box = TestFunction::box({-0.3}, {0.8});
  const double closed = smoothed_expectation(sample, box, delta, false);
  CHECK(std::fabs(smoothed_expectation(sample, box, delta, false, mc) - closed) < 0.01);

  mc.gauss_budget = 1;
  CHECK_THROWS_AS(smoothed_expectation(sample, cosine, delta, false, mc), ConfigError);
  CHECK_THROWS_AS(smoothed_expectation(sample, cosine, 0.0, false), ConfigError);
}
