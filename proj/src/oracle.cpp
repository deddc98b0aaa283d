#include "mvjump/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mvjump/errors.hpp"

namespace mvjump::oracle {

const char* method_name(Method m) noexcept {
  switch (m) {
    case Method::Analytic: return "analytic";
    case Method::DirectMc: return "direct-mc";
    case Method::Ode: return "ode";
  }
  return "?";
}

std::pair<OracleResult, OracleResult> compound_poisson_moments(const LevyMeasureModel& levy,
                                                               const ScalarField& gamma,
                                                               std::size_t M, double t,
                                                               double init_mean, double init_var,
                                                               double tail_sigma) {
  const double m = static_cast<double>(M);
  const ScalarField square = [&](Point z) { return gamma(z) * gamma(z); };
  const double first = levy.shell_integral(gamma, false, 0.0, m);
  const double second = levy.shell_integral(square, false, 0.0, m);
  return {{"mean", init_mean + t * first, 0.0, Method::Analytic},
          {"variance", init_var + tail_sigma * tail_sigma + t * second, 0.0, Method::Analytic}};
}

std::pair<OracleResult, OracleResult> compound_poisson_direct(const LevyMeasureModel& levy,
                                                              const ScalarField& gamma,
                                                              std::size_t M, double t, double x0,
                                                              std::size_t paths,
                                                              std::uint64_t seed) {
  if (levy.dimension() != 1) throw ConfigError("compound_poisson_direct: d must be 1");
  if (paths < 2) throw ConfigError("compound_poisson_direct: need at least 2 paths");
  std::mt19937_64 rng(seed);
  std::vector<double> ring_mass(M);
  for (std::size_t k = 1; k <= M; ++k) ring_mass[k - 1] = levy.annulus_mass(k);
  std::discrete_distribution<std::size_t> pick_ring(ring_mass.begin(), ring_mass.end());
  std::poisson_distribution<long> count(levy.truncated_mass(M) * t);
  StreamFamily family(seed);

  double sum = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  for (std::size_t p = 0; p < paths; ++p) {
    double x = x0;
    const long n = count(rng);
    for (long j = 0; j < n; ++j) {
      const std::size_t k = pick_ring(rng) + 1;
      Stream s = family.stream({Purpose::Auxiliary, p, k, 0}, static_cast<std::uint64_t>(j));
      const Vec z = levy.sample_in_annulus(k, s);
      x += gamma(z);
    }
    sum += x;
    sum2 += x * x;
    sum3 += x * x * x;
    sum4 += x * x * x * x;
  }
  const double n = static_cast<double>(paths);
  const double mean = sum / n;
  const double var = (sum2 - n * mean * mean) / (n - 1.0);
  const double m4 = sum4 / n - 4 * mean * sum3 / n + 6 * mean * mean * sum2 / n - 3 * std::pow(mean, 4);
  return {{"mean", mean, std::sqrt(var / n), Method::DirectMc},
          {"variance", var, std::sqrt(std::max(m4 - var * var, 0.0) / n), Method::DirectMc}};
}

MeanFieldMoments meanfield_ode(const std::vector<double>& A, const std::vector<double>& B,
                               double t, const Vec& mean0, const std::vector<double>& cov0) {
  const std::size_t d = mean0.size();
  if (A.size() != d * d || B.size() != d * d || cov0.size() != d * d) {
    throw ConfigError("meanfield_ode: matrix sizes must be d x d");
  }
  // State: mean (d) followed by cov (d*d).
  auto rhs = [&](const std::vector<double>& s) {
    std::vector<double> out(d + d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i] += (A[i * d + j] + B[i * d + j]) * s[j];
    const double* C = s.data() + d;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < d; ++k) v += B[i * d + k] * C[k * d + j] + C[i * d + k] * B[j * d + k];
        out[d + i * d + j] = v;
      }
    return out;
  };
  std::vector<double> s(mean0);
  s.insert(s.end(), cov0.begin(), cov0.end());
  if (t > 0.0) {
    const std::size_t steps = 10000;
    const double h = t / static_cast<double>(steps);
    std::vector<double> tmp(s.size());
    for (std::size_t n = 0; n < steps; ++n) {
      const auto k1 = rhs(s);
      for (std::size_t i = 0; i < s.size(); ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
      const auto k2 = rhs(tmp);
      for (std::size_t i = 0; i < s.size(); ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
      const auto k3 = rhs(tmp);
      for (std::size_t i = 0; i < s.size(); ++i) tmp[i] = s[i] + h * k3[i];
      const auto k4 = rhs(tmp);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
  }
  MeanFieldMoments m;
  m.mean.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(d));
  m.cov.assign(s.begin() + static_cast<std::ptrdiff_t>(d), s.end());
  return m;
}

double gaussian_pdf(Point x, Point mean, double var) {
  const double d = static_cast<double>(x.size());
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - mean[i]) * (x[i] - mean[i]);
  return std::exp(-0.5 * r2 / var) / std::pow(2.0 * std::numbers::pi * var, 0.5 * d);
}

namespace {

double centered_pdf(Point x, double var) {
  const Vec zero(x.size(), 0.0);
  return gaussian_pdf(x, zero, var);
}

// E[phi_a(X - x) phi_b(X - x)], X ~ N(0, s2 I): product of Gaussians in x.
double cross_moment(Point x, double s2, double a, double b) {
  const double d = static_cast<double>(x.size());
  const double a2 = a * a, b2 = b * b;
  const double c = a2 * b2 / (a2 + b2);
  // phi_a phi_b = N(0, a2 + b2)(0) * phi_sqrt(c)(. - x)
  const double front = std::pow(2.0 * std::numbers::pi * (a2 + b2), -0.5 * d);
  return front * centered_pdf(x, s2 + c);
}

}  // namespace

double expected_kde_plain(Point x, double sigma2, double delta) {
  return centered_pdf(x, sigma2 + delta * delta);
}

double expected_kde_romberg(Point x, double sigma2, double delta) {
  return 2.0 * centered_pdf(x, sigma2 + 0.5 * delta * delta) - centered_pdf(x, sigma2 + delta * delta);
}

double kernel_term_stddev(Point x, double sigma2, double delta) {
  const double m1 = expected_kde_plain(x, sigma2, delta);
  return std::sqrt(std::max(cross_moment(x, sigma2, delta, delta) - m1 * m1, 0.0));
}

double romberg_term_stddev(Point x, double sigma2, double delta) {
  const double h = delta / std::sqrt(2.0);
  const double second = 4.0 * cross_moment(x, sigma2, h, h) - 4.0 * cross_moment(x, sigma2, h, delta) +
                        cross_moment(x, sigma2, delta, delta);
  const double m1 = expected_kde_romberg(x, sigma2, delta);
  return std::sqrt(std::max(second - m1 * m1, 0.0));
}

double brute_force_kde(const Positions& particles, Point x, double delta, bool romberg) {
  auto plain = [&](double h) {
    double sum = 0.0;
    for (std::size_t i = 0; i < particles.size(); ++i) sum += gaussian_pdf(particles.row(i), x, h * h);
    return sum / static_cast<double>(particles.size());
  };
  return romberg ? 2.0 * plain(delta / std::sqrt(2.0)) - plain(delta) : plain(delta);
}

double assignment_w1(const Positions& a, const Positions& b) {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n || a.dim() != b.dim()) {
    throw ConfigError("assignment_w1: samples must be nonempty and of equal size and dimension");
  }
  if (n > 64) throw ConfigError("assignment_w1: n must be <= 64");
  auto cost = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.dim(); ++k) s += (a.row(i)[k] - b.row(j)[k]) * (a.row(i)[k] - b.row(j)[k]);
    return std::sqrt(s);
  };
  // Hungarian algorithm (potentials), 1-based internally.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
  return total / static_cast<double>(n);
}

}  // namespace mvjump::oracle
