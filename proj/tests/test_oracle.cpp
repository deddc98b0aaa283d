#include <doctest.h>

#include <cmath>

#include "mvjump/models.hpp"
#include "mvjump/oracle.hpp"

using namespace mvjump;

TEST_CASE("compound Poisson moments") {
  auto leb = make_measure("lebesgue", {});
  auto zero = [](Point) { return 0.0; };
  auto [m0, v0] = oracle::compound_poisson_moments(*leb, zero, 5, 1.0, 0.3, 2.0, 0.5);
  CHECK(m0.value == 0.3);
  CHECK(v0.value == doctest::Approx(2.25));

  auto gamma = [](Point z) { return std::exp(-std::fabs(z[0])); };
  auto [m, v] = oracle::compound_poisson_moments(*leb, gamma, 5, 1.0, 0.0, 0.0);
  CHECK(m.value == doctest::Approx(1.986524).epsilon(1e-6));
  CHECK(v.value == doctest::Approx(0.9999546).epsilon(1e-6));
  CHECK(m.method == oracle::Method::Analytic);

  auto [m2, v2] = oracle::compound_poisson_moments(*leb, gamma, 5, 2.0, 0.0, 0.0);
  CHECK(m2.value == doctest::Approx(2.0 * m.value));
  CHECK(v2.value == doctest::Approx(2.0 * v.value));

  auto [dm, dv] = oracle::compound_poisson_direct(*leb, gamma, 5, 1.0, 0.0, 40000, 7);
  CHECK(std::fabs(dm.value - m.value) < 4 * dm.std_error);
  CHECK(std::fabs(dv.value - v.value) < 4 * dv.std_error);
}

TEST_CASE("mean-field moment ODE") {
  const auto mr = oracle::meanfield_ode({1.0}, {-1.0}, 1.0, {0.7}, {1.0});
  CHECK(mr.mean[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(mr.cov[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-10));
  const auto still = oracle::meanfield_ode({0.0}, {0.0}, 3.0, {0.7}, {1.5});
  CHECK(still.mean[0] == 0.7);
  CHECK(still.cov[0] == 1.5);
  const auto decay = oracle::meanfield_ode({0.0}, {-1.0}, 1.0, {2.0}, {0.0});
  CHECK(decay.mean[0] == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-10));
  // d = 2 with a rotation-free diagonal B
  const auto two = oracle::meanfield_ode({0, 0, 0, 0}, {-1, 0, 0, -0.5}, 1.0, {1, 1}, {1, 0, 0, 1});
  CHECK(two.cov[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-10));
  CHECK(two.cov[3] == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
  CHECK(two.cov[1] == 0.0);
}

TEST_CASE("gaussian convolution closed forms") {
  const double x0[] = {0.0};
  CHECK(oracle::expected_kde_plain(x0, 1.0, 0.5) == doctest::Approx(0.356825).epsilon(1e-6));
  // Monte Carlo of the kernel moments by quadrature on a fine grid
  const double delta = 0.4, x = 0.3;
  double m1 = 0.0, m2 = 0.0;
  const double h = 1e-3;
  for (double y = -10; y <= 10; y += h) {
    const double w = std::exp(-0.5 * y * y) / std::sqrt(2 * M_PI) * h;
    const double k = std::exp(-0.5 * (y - x) * (y - x) / (delta * delta)) / (delta * std::sqrt(2 * M_PI));
    m1 += w * k;
    m2 += w * k * k;
  }
  const double px[] = {x};
  CHECK(oracle::expected_kde_plain(px, 1.0, delta) == doctest::Approx(m1).epsilon(1e-8));
  CHECK(oracle::kernel_term_stddev(px, 1.0, delta) == doctest::Approx(std::sqrt(m2 - m1 * m1)).epsilon(1e-6));
}

TEST_CASE("brute force kde and assignment") {
  Positions one(1, 1, {0.0});
  const double x0[] = {0.0};
  CHECK(oracle::brute_force_kde(one, x0, 1.0, false) == doctest::Approx(0.398942).epsilon(1e-6));
  Positions a(2, 1, {0.0, 2.0}), b(2, 1, {1.0, 3.0});
  CHECK(oracle::assignment_w1(a, b) == doctest::Approx(1.0));
  Positions c(3, 1, {5.0, 0.0, 1.0}), e(3, 1, {1.0, 5.0, 0.0});
  CHECK(oracle::assignment_w1(c, e) == 0.0);
}
