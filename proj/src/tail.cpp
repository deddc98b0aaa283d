#include "mvjump/tail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvjump/errors.hpp"

namespace mvjump {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double tail_integral(const LevyMeasureModel& levy, const ScalarField& f, bool f_radial, double M) {
  const double cut2 = 2.0 * static_cast<double>(levy.max_ring());
  const double cut4 = 4.0 * static_cast<double>(levy.max_ring());
  try {
    const double value = levy.shell_integral(f, f_radial, M, kInf);
    const double r2 = levy.shell_integral(f, f_radial, cut2, kInf);
    const double r4 = levy.shell_integral(f, f_radial, cut4, kInf);
    const auto& q = levy.options().quadrature;
    const double significant = std::max(q.abs_tol, q.rel_tol * std::fabs(value));
    if (std::fabs(r2) > significant && std::fabs(r4) >= 0.9 * std::fabs(r2)) {
      std::ostringstream msg;
      msg << "tail integral does not converge: remainder beyond " << cut2 << " is " << r2
          << ", beyond " << cut4 << " is " << r4;
      throw NumericError(msg.str());
    }
    return value;
  } catch (const QuadratureError& e) {
    throw NumericError(std::string("tail integral does not converge: ") + e.what());
  }
}

double tail_sigma(const LevyMeasureModel& levy, const CoefficientModel& coeffs, std::size_t M,
                  double T) {
  if (!(T >= 0.0)) throw ConfigError("tail_sigma: T must be nonnegative");
  if (!coeffs.clower) return 0.0;
  const double integral =
      tail_integral(levy, coeffs.clower, coeffs.radial_envelopes, static_cast<double>(M));
  return std::sqrt(T * std::max(integral, 0.0));
}

double epsilon_m(const LevyMeasureModel& levy, const CoefficientModel& coeffs, std::size_t M) {
  if (!coeffs.cbar) return 0.0;
  const ScalarField square = [&](Point z) {
    const double c = coeffs.cbar(z);
    return c * c;
  };
  const double m = static_cast<double>(M);
  const double second = tail_integral(levy, square, coeffs.radial_envelopes, m);
  const double first = tail_integral(levy, coeffs.cbar, coeffs.radial_envelopes, m);
  return second + first * first;
}

TailQuantities tail_quantities(const LevyMeasureModel& levy, const CoefficientModel& coeffs,
                               std::size_t M, double T) {
  return {M, T, tail_sigma(levy, coeffs, M, T), epsilon_m(levy, coeffs, M),
          levy.options().quadrature.abs_tol};
}

MomentResult cbar_moment(const LevyMeasureModel& levy, const CoefficientModel& coeffs, double p) {
  if (!(p >= 1.0)) throw ConfigError("cbar_moment: order p must be >= 1");
  if (!coeffs.cbar) return {};
  const ScalarField power = [&](Point z) { return std::pow(std::fabs(coeffs.cbar(z)), p); };
  const double cut = static_cast<double>(levy.max_ring());
  MomentResult out;
  try {
    out.inner = levy.shell_integral(power, coeffs.radial_envelopes, 0.0, cut);
    out.tail = tail_integral(levy, power, coeffs.radial_envelopes, cut);
    out.tail_remainder = levy.shell_integral(power, coeffs.radial_envelopes, 4.0 * cut, kInf);
  } catch (const NumericError& e) {
    std::ostringstream msg;
    msg << "moment of cbar of order " << p << " is not finite: " << e.what();
    throw NumericError(msg.str());
  }
  out.value = out.inner + out.tail;
  return out;
}

std::vector<double> default_theta_grid() {
  std::vector<double> g;
  for (int e = 1; e <= 8; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

nlohmann::json ThetaEstimate::to_json() const {
  nlohmann::json j;
  j["value"] = infinite ? nlohmann::json("infinite") : nlohmann::json(value);
  j["infinite"] = infinite;
  j["finite_mass"] = finite_mass;
  j["heuristic"] = true;
  j["u_grid"] = u_grid;
  j["level_radius"] = level_radius;
  j["nu"] = nu;
  j["ratio"] = ratio;
  j["tail_elasticity"] = tail_elasticity;
  return j;
}

namespace {

// sup{r >= r0 : clower(r) >= level}, assuming clower nonincreasing; +inf if
// the level set is unbounded, r0 - 1 if empty.
double level_radius(const std::function<double(double)>& clower, double r0, double level) {
  if (clower(r0) < level) return r0 - 1.0;
  double lo = r0;
  double hi = std::max(1.0, 2.0 * r0);
  while (clower(hi) >= level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return kInf;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (clower(mid) >= level ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

ThetaEstimate theta_lower_bound(const LevyMeasureModel& levy, const CoefficientModel& coeffs,
                                const std::vector<double>& u_grid, const ThetaOptions& opt) {
  if (u_grid.size() < 3) throw ConfigError("theta_lower_bound: u_grid needs at least 3 points");
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    if (!(u_grid[i] > 1.0) || (i > 0 && !(u_grid[i] > u_grid[i - 1]))) {
      throw ConfigError("theta_lower_bound: u_grid must be increasing and > 1");
    }
  }
  if (!levy.radial() || !coeffs.radial_envelopes || !coeffs.clower_radially_nonincreasing) {
    throw ConfigError(
        "theta_lower_bound: requires a radial measure and a radial, nonincreasing clower");
  }

  ThetaEstimate est;
  est.u_grid = u_grid;
  const std::size_t d = levy.dimension();
  Vec z(d, 0.0);
  auto clower = [&](double r) -> double {
    if (!coeffs.clower) return 0.0;
    z[0] = r;
    return coeffs.clower(z);
  };
  const double r0 = levy.support_lower_radius();

  try {
    for (double u : u_grid) {
      const double R = level_radius(clower, r0, 1.0 / u);
      est.level_radius.push_back(R);
      double nu = 0.0;
      if (std::isinf(R)) {
        nu = kInf;
      } else if (R > r0 - 1.0) {
        const double shells = std::ceil(R + 0.75);
        if (shells > static_cast<double>(opt.max_shells)) {
          throw NumericError("theta_lower_bound: level set spans too many shells");
        }
        for (std::size_t k = 1; static_cast<double>(k) - 0.75 < R; ++k) {
          const double a = static_cast<double>(k) - 0.75;
          const double b = std::min(static_cast<double>(k) - 0.25, R);
          nu += levy.shell_mass(a, b);
        }
      }
      est.nu.push_back(nu);
      est.ratio.push_back(nu / std::log(u));
    }
  } catch (const QuadratureError& e) {
    throw NumericError(std::string("theta_lower_bound: level-set quadrature failed: ") + e.what());
  }

  const std::size_t n = u_grid.size();
  const std::size_t tail = std::min(std::max<std::size_t>(opt.tail_points, 2), n);
  const std::size_t first = n - tail;

  if (std::isinf(est.nu.back())) {
    est.infinite = true;
    est.value = kInf;
    return est;
  }
  const double nu_first = est.nu[first];
  const double nu_last = est.nu.back();
  if (levy.total_mass().has_value() || nu_last <= 0.0 ||
      nu_last - nu_first <= opt.saturation_rel_tol * nu_last) {
    est.finite_mass = nu_last > 0.0 || levy.total_mass().has_value();
    est.value = 0.0;
    return est;
  }

  bool increasing = true;
  for (std::size_t i = first + 1; i < n; ++i) increasing &= est.ratio[i] > est.ratio[i - 1];
  est.tail_elasticity = std::log(est.ratio.back() / est.ratio[first]) /
                        std::log(std::log(u_grid.back()) / std::log(u_grid[first]));
  if (increasing && est.tail_elasticity >= opt.growth_elasticity_threshold) {
    est.infinite = true;
    est.value = kInf;
    return est;
  }
  est.value = *std::min_element(est.ratio.begin() + static_cast<std::ptrdiff_t>(first),
                                est.ratio.end());
  return est;
}

}  // namespace mvjump
