#pragma once

// Convergence diagnostics: empirical W1, residuals of the weak form of the
// limit equation, log-log slope fits and the time-validity thresholds of
// the density / total-variation rates.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvjump/coefficients.hpp"
#include "mvjump/levy_model.hpp"
#include "mvjump/particle_engine.hpp"
#include "mvjump/types.hpp"

namespace mvjump {

// ---- Wasserstein-1 ---------------------------------------------------------

/// Exact W1 between two empirical laws on the line (L1 distance of the
/// quantile functions).
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

struct W1Options {
  std::size_t directions = 64;  ///< sliced approximation, d >= 2
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct W1Result {
  double value = 0.0;
  bool sliced = false;
  std::size_t directions = 0;
  const char* method() const noexcept { return sliced ? "sliced-w1" : "exact-1d"; }
};

/// Exact for d = 1; for d >= 2 the average of 1-d W1 over random unit
/// directions (an approximation, flagged in the result).
W1Result wasserstein1(const Positions& a, const Positions& b, const W1Options& options = {});

// ---- weak-form residuals ----------------------------------------------------

struct SmoothTestFunction {
  std::string name;
  std::function<double(Point)> value;
  std::function<void(Point, MutPoint)> gradient;

  /// sum_j cos(x_j)
  static SmoothTestFunction cosine();
  /// x_j
  static SmoothTestFunction coordinate(std::size_t j);
};

struct WeakResidual {
  double t = 0.0;
  double h = 0.0;
  double signed_residual = 0.0;
  double residual = 0.0;  ///< |signed_residual|
  double change = 0.0;    ///< mean phi(X_{t+h}) - mean phi(X_t), over h in the difference form
  double drift_term = 0.0;
  double jump_term = 0.0;
  double std_error = 0.0;  ///< combined
  double change_std_error = 0.0;
  double jump_std_error = 0.0;
  std::size_t M = 0;
  double truncated_mass = 0.0;  ///< mu(B_M); jumps beyond B_M are not in the generator
  std::size_t draws = 0;

  nlohmann::json to_json() const;
};

struct WeakResidualOptions {
  std::size_t mc_budget = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// |(mean phi(X_{t+h}) - mean phi(X_t)) / h - G(rho_t) phi| where G is the
/// generator restricted to B_M applied to the empirical measure at t:
/// mean <b, grad phi> plus a Monte Carlo estimate of the jump term with
/// (i, u) uniform and z drawn ring-proportionally from mu on B_M.
WeakResidual weak_residual(const Positions& at_t, const Positions& at_t_plus_h, double t, double h,
                           const LevyMeasureModel& levy, const CoefficientModel& coeffs,
                           std::size_t M, const SmoothTestFunction& phi,
                           const WeakResidualOptions& options = {});

/// Integral form along one simulated path:
///   mean phi(X_t) - mean phi(X_0) - sum_k (r_{k+1} - r_k) G(rho_{r_k}) phi.
/// Each particle carries its own unbiased generator estimate (draws_per_step
/// partner/jump draws per step), so the per-particle residuals give the
/// standard error of the mean directly.  Feed every grid state in order.
class WeakResidualPath {
 public:
  WeakResidualPath(std::shared_ptr<const LevyMeasureModel> levy, CoefficientModel coeffs,
                   std::size_t M, SmoothTestFunction phi, std::size_t draws_per_step = 4,
                   std::uint64_t seed = 0, unsigned threads = 1);

  void observe(const ParticleSystemState& state);
  bool started() const noexcept { return started_; }
  WeakResidual result() const;

 private:
  void generator_terms(const ParticleSystemState& state);

  std::shared_ptr<const LevyMeasureModel> levy_;
  CoefficientModel coeffs_;
  std::size_t M_;
  SmoothTestFunction phi_;
  std::size_t draws_;
  std::uint64_t seed_;
  unsigned threads_;
  std::vector<double> ring_cdf_;
  double mass_ = 0.0;

  bool started_ = false;
  double t0_ = 0.0, t_ = 0.0;
  std::vector<double> phi0_, phi_now_;
  std::vector<double> drift_now_, jump_now_;    // generator pieces at t_
  std::vector<double> drift_acc_, jump_acc_;    // integrated up to t_
};

// ---- slopes and thresholds -------------------------------------------------

struct ConvergenceReport {
  std::string label;
  std::vector<double> ladder;
  std::vector<double> errors;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  ///< root of the summed squared log residuals
  std::optional<double> target;
  double tolerance = 0.0;
  std::optional<double> minimum;
  bool pass = true;

  nlohmann::json to_json() const;
};

struct SlopeCriterion {
  std::optional<double> target;
  double tolerance = 0.0;
  std::optional<double> minimum;
};

/// Least-squares fit of log(error) against log(param) over >= 3 rungs with
/// strictly monotone params.
ConvergenceReport convergence_slope(const std::vector<std::pair<double, double>>& ladder,
                                    const SlopeCriterion& criterion = {},
                                    std::string label = {});

constexpr double kInfiniteTheta = std::numeric_limits<double>::infinity();

/// Earliest time from which the named rate holds:
///   density-l        8d(l + d)/theta       (needs l)
///   tv-euler,
///   tv-truncated     8d/theta (8/eps + 1)  (needs eps)
///   density-plain    8d/theta (2 + d)
///   density-romberg  8d/theta (4 + d)
///   tv-smoothed      8d/theta (16/eps + 1) (needs eps)
/// 0 when theta is infinite; theta = 0 has no validity window.
double validity_threshold(const std::string& tag, std::size_t d, double theta,
                          std::optional<double> epsilon = {}, std::optional<int> l = {});

const std::vector<std::string>& validity_tags();

}  // namespace mvjump
