#pragma once

// Tail quantities of a (measure, coefficient) pair:
//   a^M_T  = sqrt(T * int_{|z|>M} clower dmu)       (Gaussian replacement scale)
//   eps_M  = int_{|z|>M} cbar^2 dmu + (int_{|z|>M} cbar dmu)^2
//   cbar_p = int |cbar|^p dmu
// and the finite-grid diagnostic for the noise-growth rate theta.

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "mvjump/coefficients.hpp"
#include "mvjump/levy_model.hpp"

namespace mvjump {

struct TailQuantities {
  std::size_t M = 0;
  double T = 0.0;
  double a_M_T = 0.0;
  double eps_M = 0.0;
  double quadrature_abs_tol = 0.0;
};

/// int_{|z|>M} f dmu with a convergence check: the remainders beyond
/// 2*max_ring and 4*max_ring must shrink by a factor below 0.9.
double tail_integral(const LevyMeasureModel& levy, const ScalarField& f, bool f_radial, double M);

double tail_sigma(const LevyMeasureModel& levy, const CoefficientModel& coeffs, std::size_t M,
                  double T);
double epsilon_m(const LevyMeasureModel& levy, const CoefficientModel& coeffs, std::size_t M);
TailQuantities tail_quantities(const LevyMeasureModel& levy, const CoefficientModel& coeffs,
                               std::size_t M, double T);

struct MomentResult {
  double value = 0.0;
  double inner = 0.0;            ///< over B_{max_ring}
  double tail = 0.0;             ///< beyond max_ring
  double tail_remainder = 0.0;   ///< beyond 4 * max_ring
};

MomentResult cbar_moment(const LevyMeasureModel& levy, const CoefficientModel& coeffs, double p);

struct ThetaOptions {
  /// Number of trailing grid points examined.
  std::size_t tail_points = 3;
  /// "Infinite" when the trailing values increase and the elasticity of
  /// value against ln u exceeds this threshold.
  double growth_elasticity_threshold = 0.5;
  /// nu considered saturated (finite measure) when it grows by less than
  /// this relative amount over the trailing points.
  double saturation_rel_tol = 1e-6;
  std::size_t max_shells = 10'000'000;
};

struct ThetaEstimate {
  double value = 0.0;
  bool infinite = false;
  bool finite_mass = false;
  std::vector<double> u_grid;
  std::vector<double> level_radius;  ///< sup{|z| : clower(z) >= 1/u}
  std::vector<double> nu;            ///< nu{clower >= 1/u}
  std::vector<double> ratio;         ///< nu / ln u
  double tail_elasticity = 0.0;

  nlohmann::json to_json() const;
};

/// 10^1, 10^2, ..., 10^8.
std::vector<double> default_theta_grid();

/// Heuristic estimate of liminf_{u->inf} nu{clower >= 1/u} / ln u, with
/// nu the restriction of mu to the shells k-3/4 <= |z| <= k-1/4.
/// Requires a radial measure and a radial, nonincreasing clower.
ThetaEstimate theta_lower_bound(const LevyMeasureModel& levy, const CoefficientModel& coeffs,
                                const std::vector<double>& u_grid,
                                const ThetaOptions& options = {});

}  // namespace mvjump
