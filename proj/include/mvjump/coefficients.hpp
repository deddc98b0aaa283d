#pragma once

// Drift b(r, x, rho) and jump coefficient c(r, v, z, x, rho), with the
// declared envelopes used by the tail quantities and the hypothesis checks:
//   cbar   : bound on |c| and on its z/x derivatives,
//   clower : ellipticity lower bound on sum_j <d_{z_j} c, zeta>^2 / |zeta|^2,
//   cbreve : bound on || grad_x c (I + grad_x c)^{-1} ||.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvjump/types.hpp"

namespace mvjump {

class LevyMeasureModel;

/// Read-only view of an empirical measure: the particle positions plus
/// cached mean vector and second-moment matrix E[x x^T].
class MeasureSummary {
 public:
  explicit MeasureSummary(const Positions& positions);

  const Positions& positions() const noexcept { return *positions_; }
  std::size_t size() const noexcept { return positions_->size(); }
  std::size_t dim() const noexcept { return positions_->dim(); }
  Point mean() const noexcept { return mean_; }
  double second_moment(std::size_t i, std::size_t j) const noexcept {
    return second_[i * dim() + j];
  }

 private:
  const Positions* positions_;
  Vec mean_;
  Vec second_;
};

using DriftFn = std::function<void(double r, Point x, const MeasureSummary& rho, MutPoint out)>;
using JumpFn =
    std::function<void(double r, Point v, Point z, Point x, const MeasureSummary& rho, MutPoint out)>;
using EnvelopeFn = std::function<double(Point z)>;

struct CoefficientModel {
  std::string name;
  std::size_t dimension = 1;
  DriftFn drift;   ///< empty means b = 0
  JumpFn jump;     ///< empty means c = 0
  EnvelopeFn cbar;    ///< empty means 0
  EnvelopeFn clower;  ///< empty means 0
  EnvelopeFn cbreve;  ///< empty means cbar
  /// Envelopes depend on |z| only (enables radial quadrature).
  bool radial_envelopes = false;
  /// clower is nonincreasing in |z| on the support of mu.
  bool clower_radially_nonincreasing = false;
  /// Check |c| <= cbar on every jump evaluation (debug builds only).
  bool enforce_envelope = false;
  double drift_lipschitz = 0.0;
};

double cbar_at(const CoefficientModel& m, Point z);
double clower_at(const CoefficientModel& m, Point z);
double cbreve_at(const CoefficientModel& m, Point z);

void eval_drift(const CoefficientModel& m, double r, Point x, const MeasureSummary& rho, MutPoint out);
Vec eval_drift(const CoefficientModel& m, double r, Point x, const MeasureSummary& rho);

void eval_jump(const CoefficientModel& m, double r, Point v, Point z, Point x,
               const MeasureSummary& rho, MutPoint out);
Vec eval_jump(const CoefficientModel& m, double r, Point v, Point z, Point x,
              const MeasureSummary& rho);

/// Central-difference Jacobian of f at p: column j holds d f / d p_j.
/// Returned row-major as an out_dim x p.size() matrix.
std::vector<double> central_jacobian(const std::function<void(Point, MutPoint)>& f, Point p,
                                     std::size_t out_dim, double step);

struct ValidationOptions {
  std::size_t sample_budget = 1000;
  /// Relative finite-difference step; the absolute step is fd_step * (1 + |arg|).
  double fd_step = 1e-5;
  double slack = 0.05;
  double horizon = 1.0;
  std::uint64_t seed = 0x5A17;
  std::size_t ensemble_size = 16;
  std::size_t rings = 8;
  std::size_t directions_per_sample = 4;
};

struct Witness {
  double r = 0.0;
  Vec v, z, x;
  double observed = 0.0;
  double bound = 0.0;
  std::string note;
};

struct HypothesisCheck {
  std::string id;
  std::string description;
  bool passed = true;
  std::size_t evaluations = 0;
  std::size_t violations = 0;
  /// Largest observed / allowed ratio (for lower bounds: allowed / observed).
  double worst_ratio = 0.0;
  std::optional<Witness> witness;
};

struct ValidationReport {
  std::string model;
  std::vector<HypothesisCheck> checks;
  std::vector<std::string> unvalidated;

  bool all_passed() const;
  const HypothesisCheck& check(const std::string& id) const;
  nlohmann::json to_json() const;
};

/// Spot-checks the regularity, inverse-flow and ellipticity envelopes on
/// random (r, v, z, x, rho) tuples with z drawn from the ring samplers.
/// Failures are reported with witnesses; nothing here throws for a model
/// that merely violates its declarations.
ValidationReport validate_hypotheses(const CoefficientModel& model, const LevyMeasureModel& levy,
                                     const ValidationOptions& options = {});

}  // namespace mvjump
