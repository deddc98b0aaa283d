#pragma once

// Levy measure mu(dz) = h(z) dz, its ring decomposition
//   I_1 = B_1,  I_k = B_k \ B_{k-1}  (k >= 2),
// and the per-ring samplers used by the event generator.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvjump/quadrature.hpp"
#include "mvjump/random.hpp"
#include "mvjump/types.hpp"

namespace mvjump {

using ScalarField = std::function<double(Point)>;
using RadialProfile = std::function<double(double)>;

struct LevyMeasureSpec {
  std::string name;
  std::size_t dimension = 1;
  /// h(z).  Optional for radial models (derived from the profile).
  ScalarField density;
  /// g with h(z) = g(|z|); presence marks the model radial.
  RadialProfile radial_profile;
  /// mu vanishes on |z| < support_lower_radius.
  double support_lower_radius = 0.0;
  std::size_t max_ring = 64;
  /// Closed form of mu{a < |z| <= b} for 0 <= a <= b (b may be +inf).
  std::function<double(double, double)> radial_mass;
  /// Declared sup |grad ln h| on the support.
  std::optional<double> log_density_gradient_bound;
  /// mu(R^d) when finite and known.
  std::optional<double> total_mass;
};

struct LevyModelOptions {
  QuadratureOptions quadrature;
  std::size_t cdf_table_points = 4096;
  double rejection_floor = 1e-3;
};

/// Surface area of the unit sphere in R^d (2 for d = 1).
double unit_sphere_area(std::size_t d);
/// Volume of the unit ball in R^d.
double unit_ball_volume(std::size_t d);

class LevyMeasureModel {
 public:
  explicit LevyMeasureModel(LevyMeasureSpec spec, LevyModelOptions options = {});

  const std::string& name() const noexcept { return spec_.name; }
  std::size_t dimension() const noexcept { return spec_.dimension; }
  bool radial() const noexcept { return static_cast<bool>(spec_.radial_profile); }
  double support_lower_radius() const noexcept { return spec_.support_lower_radius; }
  std::size_t max_ring() const noexcept { return spec_.max_ring; }
  std::optional<double> total_mass() const noexcept { return spec_.total_mass; }
  std::optional<double> log_density_gradient_bound() const noexcept {
    return spec_.log_density_gradient_bound;
  }
  const LevyModelOptions& options() const noexcept { return options_; }

  double density(Point z) const;
  /// g(r) for radial models.
  double profile(double r) const;

  /// mu(I_k), 1 <= k <= max_ring.  Precomputed at construction.
  double annulus_mass(std::size_t k) const;
  /// sum_{k<=m} mu(I_k).
  double truncated_mass(std::size_t m) const;
  /// mu(B_R) by direct quadrature (independent of the ring table).
  double ball_mass(double radius) const;
  /// mu{inner < |z| <= outer}; closed form when available.
  double shell_mass(double inner, double outer) const;

  /// Integral of f against mu over {inner < |z| <= outer}; outer may be
  /// +infinity.  When the model and f are both radial the integral reduces
  /// to one dimension; otherwise d = 1 and d = 2 are integrated directly.
  double shell_integral(const ScalarField& f, bool f_radial, double inner, double outer) const;

  /// Draw z from mu restricted to I_k, normalized.
  void sample_in_annulus(std::size_t k, Stream& stream, MutPoint out) const;
  Vec sample_in_annulus(std::size_t k, Stream& stream) const;

  /// Expected acceptance of the rejection sampler on I_k (1 for radial models).
  double acceptance_rate(std::size_t k) const;

 private:
  struct RingTable {
    double r_lo = 0.0;
    double r_hi = 0.0;
    std::vector<double> radii;
    std::vector<double> cdf;
  };
  struct RingRejection {
    double bound = 0.0;
    double acceptance = 0.0;
  };

  double radial_integral(const std::function<double(double)>& g, double a, double b) const;
  void build_radial_tables();
  void build_rejection_bounds();
  double sample_radius(std::size_t k, Stream& stream) const;
  void uniform_direction(Stream& stream, MutPoint out) const;

  LevyMeasureSpec spec_;
  LevyModelOptions options_;
  std::vector<double> masses_;
  std::vector<double> cumulative_;
  std::vector<RingTable> tables_;
  std::vector<RingRejection> rejection_;
};

}  // namespace mvjump
