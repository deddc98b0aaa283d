#pragma once

// Slow, independent reference values for degenerate models.  Nothing here
// shares code with the engine or the estimators except the Levy quadrature.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvjump/levy_model.hpp"
#include "mvjump/types.hpp"

namespace mvjump::oracle {

enum class Method { Analytic, DirectMc, Ode };

const char* method_name(Method m) noexcept;

struct OracleResult {
  std::string quantity;
  double value = 0.0;
  double std_error = 0.0;
  Method method = Method::Analytic;
};

/// Per-coordinate mean and variance at time t of
///   X_t = X_0 + a Delta + sum of gamma(Z) over the jumps of rings 1..M
/// (state-independent jumps, zero drift).
std::pair<OracleResult, OracleResult> compound_poisson_moments(const LevyMeasureModel& levy,
                                                               const ScalarField& gamma,
                                                               std::size_t M, double t,
                                                               double init_mean, double init_var,
                                                               double tail_sigma = 0.0);

/// Direct Monte Carlo of the same process (d = 1), one path at a time.
std::pair<OracleResult, OracleResult> compound_poisson_direct(const LevyMeasureModel& levy,
                                                              const ScalarField& gamma,
                                                              std::size_t M, double t, double x0,
                                                              std::size_t paths,
                                                              std::uint64_t seed);

struct MeanFieldMoments {
  Vec mean;
  std::vector<double> cov;  ///< d x d row-major
  Method method = Method::Ode;
};

/// Moments of dX = (A mean(X) + B X) dt:  mean' = (A + B) mean,
/// cov' = B cov + cov B^T.  Classical RK4 with step 1e-4 t.
MeanFieldMoments meanfield_ode(const std::vector<double>& A, const std::vector<double>& B,
                               double t, const Vec& mean0, const std::vector<double>& cov0);

/// Density at x of N(mean, var I_d).
double gaussian_pdf(Point x, Point mean, double var);

/// Expected plain / Romberg kernel estimate at x when the particles are
/// exactly N(0, sigma2 I_d).
double expected_kde_plain(Point x, double sigma2, double delta);
double expected_kde_romberg(Point x, double sigma2, double delta);

/// Standard deviation of one kernel term phi_delta(X - x), X ~ N(0, sigma2 I_d).
double kernel_term_stddev(Point x, double sigma2, double delta);
/// Same for the Romberg combination 2 phi_{delta/sqrt2} - phi_delta.
double romberg_term_stddev(Point x, double sigma2, double delta);

/// O(N) kernel sum at one point, no cutoff.
double brute_force_kde(const Positions& particles, Point x, double delta, bool romberg);

/// Exact mean |a_i - b_pi(i)| over permutations (Hungarian method), n <= 64.
double assignment_w1(const Positions& a, const Positions& b);

}  // namespace mvjump::oracle
