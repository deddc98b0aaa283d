#pragma once

// Gaussian-kernel density estimates of the particle law and smoothed
// expectations E f(X + delta * Delta), plus the bandwidth / particle-count
// rules that tie delta and N to the discretization error.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvjump/types.hpp"

namespace mvjump {

/// N^{-1/2} (d = 1), N^{-1/2} ln(1 + N) (d = 2), N^{-1/d} (d >= 3).
double v_n(std::size_t N, std::size_t d);

/// Smallest N >= 1 with v_n(N, d) <= bound (up to a relative 1e-12).
std::size_t min_particles(double bound, std::size_t d);

enum class Rule { DensityPlain, DensityRomberg, TvPlain, TvRomberg };

const char* rule_name(Rule r) noexcept;
Rule parse_rule(const std::string& name);

struct EstimatorParams {
  Rule rule = Rule::DensityPlain;
  std::size_t d = 1;
  double base = 0.0;      ///< |P| + sqrt(eps_M) (density) or |P| + eps_M (tv)
  double delta = 0.0;
  double vn_bound = 0.0;  ///< V_N must not exceed this
  std::size_t n_required = 0;
  std::optional<double> epsilon;
  /// The rules assume base <= 1; larger bases are evaluated anyway.
  bool base_above_one = false;

  bool romberg() const noexcept { return rule == Rule::DensityRomberg || rule == Rule::TvRomberg; }
};

/// delta = base^{1/(d+3)} (plain) or base^{1/(d+5)} (Romberg); V_N <= base.
EstimatorParams select_density_params(double abs_P, double eps_M, std::size_t d, bool romberg);

/// Plain:   delta = base^{(1 - e')/2},  e' = e/(2-e),
///          V_N <= base^{(d+3)(1 - e'')/2},  e'' = ((d+5)e - 2e^2) / ((d+3)(2-e)).
/// Romberg: delta = base^{(1 - e')/4},  e' = e^2/(2-e),
///          V_N <= base^{(d+5)(1 - e'')/4},  e'' = (8e + (d-3)e^2) / ((d+5)(2-e)).
EstimatorParams select_tv_params(double abs_P, double eps_M, std::size_t d, double epsilon,
                                 bool romberg);

/// phi_delta(x) = delta^{-d} (2 pi)^{-d/2} exp(-|x|^2 / (2 delta^2)).
double gaussian_kernel(Point x, double delta);

struct DensityEstimate {
  Positions grid;
  std::vector<double> values;
  double delta = 0.0;
  bool romberg = false;
  std::size_t N = 0;
  std::optional<EstimatorParams> params;
  std::size_t negative_values = 0;

  /// Columns x1..xd, value, method, delta, N.
  void write_csv(const std::filesystem::path& path) const;
};

/// Kernel sums truncated at |x - X^i| > 8 * bandwidth, with sorted buckets
/// in d = 1 and a uniform cell hash in d >= 2.
DensityEstimate kde_estimate(const Positions& particles, const Positions& grid, double delta,
                             bool romberg, unsigned threads = 1);

class TestFunction {
 public:
  enum class Kind { Constant, Box, General };

  static TestFunction constant(double value);
  /// Indicator of prod_j [lower_j, upper_j]; bounds may be infinite.
  static TestFunction box(Vec lower, Vec upper);
  static TestFunction general(std::function<double(Point)> f, double bound, std::string name = "f");

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double bound() const noexcept { return bound_; }
  const Vec& lower() const noexcept { return lower_; }
  const Vec& upper() const noexcept { return upper_; }
  double operator()(Point x) const;

 private:
  Kind kind_ = Kind::Constant;
  std::string name_;
  double value_ = 0.0;
  double bound_ = 0.0;
  Vec lower_, upper_;
  std::function<double(Point)> f_;
};

struct SmoothingOptions {
  enum class Mode { Auto, MonteCarlo };
  Mode mode = Mode::Auto;
  /// Gaussian draws shared by all particles (antithetic pairs); Monte Carlo only.
  std::size_t gauss_budget = 0;
  std::uint64_t seed = 0;
};

/// (1/N) sum_i E f(X^i + delta Delta), or its Romberg combination
/// 2 S(delta / sqrt 2) - S(delta).  Constants and boxes are exact; other
/// functions use the same antithetic Gaussian draws for both bandwidths.
double smoothed_expectation(const Positions& particles, const TestFunction& f, double delta,
                            bool romberg, const SmoothingOptions& options = {});

struct TvEstimate {
  std::vector<std::string> functions;
  std::vector<double> values;
  double delta = 0.0;
  bool romberg = false;
  std::size_t N = 0;
  std::optional<EstimatorParams> params;
};

}  // namespace mvjump
