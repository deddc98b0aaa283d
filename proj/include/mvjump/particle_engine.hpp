#pragma once

// N-particle truncated Euler scheme.  Between grid times r_k < r_{k+1}:
//
//   X^i <- X^i + b(r_k, X^i, rho) (r_{k+1} - r_k)
//              + sum over events of i of c(r_k, X^{u}, z, X^i, rho)
//
// with every argument read from the r_k snapshot (rho is the empirical
// measure at r_k).  The Gaussian replacement of the jumps beyond ring M,
// a^M_T * Delta^i, is added once at time 0.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvjump/coefficients.hpp"
#include "mvjump/events.hpp"
#include "mvjump/levy_model.hpp"
#include "mvjump/random.hpp"
#include "mvjump/types.hpp"

namespace mvjump {

class Partition {
 public:
  /// n = ceil(T / max_step) equal steps.
  static Partition uniform(double T, double max_step);
  /// n * 2^refinement equal steps.  Step s lies in common-random-number
  /// block s >> refinement, so grids with the same n share their jumps.
  static Partition uniform_steps(double T, std::size_t n, std::uint32_t refinement = 0);
  /// Strictly increasing grid starting at 0.
  static Partition explicit_grid(std::vector<double> times);

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t steps() const noexcept { return times_.size() - 1; }
  double horizon() const noexcept { return times_.back(); }
  double max_step() const noexcept;
  bool is_uniform() const noexcept { return uniform_; }
  /// Step length used for event intensities on uniform grids.
  double uniform_step() const noexcept { return step_; }
  std::uint32_t refinement() const noexcept { return refinement_; }
  std::optional<std::size_t> index_of(double t) const;

 private:
  std::vector<double> times_{0.0};
  bool uniform_ = true;
  double step_ = 0.0;
  std::uint32_t refinement_ = 0;
};

class InitialLaw {
 public:
  enum class Kind { Point, Gaussian, Samples };

  static InitialLaw point(Vec x0);
  /// cov is d x d row-major, symmetric positive semidefinite.
  static InitialLaw gaussian(Vec mean, std::vector<double> cov);
  static InitialLaw samples(Positions rows);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept;
  const Vec& mean() const noexcept { return mean_; }
  const std::vector<double>& cov() const noexcept { return cov_; }
  const Positions& rows() const noexcept { return rows_; }

  /// X_0 for particle slot `slot` drawn from stream label `label`.
  void draw(std::size_t slot, std::uint64_t label, const StreamFamily& streams, MutPoint out) const;

 private:
  Kind kind_ = Kind::Point;
  Vec mean_{0.0};
  std::vector<double> cov_;
  std::vector<double> root_;  // symmetric square root of cov
  Positions rows_;
};

struct SimConfig {
  Partition partition = Partition::uniform(1.0, 0.1);
  std::size_t M = 1;
  std::size_t N = 1;
  std::uint64_t seed = 0;
  std::shared_ptr<const LevyMeasureModel> levy;
  CoefficientModel coeffs;
  InitialLaw initial = InitialLaw::point({0.0});
  unsigned threads = 1;
  bool sample_jump_times = false;
  /// Replaces StreamFamily(seed) when set (e.g. to re-seed one purpose).
  std::optional<StreamFamily> streams;
  /// Stream label of each particle slot; identity when empty.
  std::vector<std::uint64_t> labels;

  double horizon() const noexcept { return partition.horizon(); }
  StreamFamily stream_family() const { return streams ? *streams : StreamFamily(seed); }
  void validate() const;
};

struct ParticleSystemState {
  std::size_t step = 0;
  double time = 0.0;
  /// Positions at `time`; also the frozen snapshot read during a step.
  Positions positions;
  double tail_sigma = 0.0;
  std::uint64_t events_applied = 0;
};

ParticleSystemState init_system(const SimConfig& config);

/// Advances one grid step with events generated for that step.
void step_system(ParticleSystemState& state, const EventList& events, const SimConfig& config);

/// Events for the state's next step under the config's stream layout.
EventList next_step_events(const ParticleSystemState& state, const SimConfig& config);

struct SimulationResult {
  std::map<double, Positions> snapshots;
  std::uint64_t total_events = 0;
  double wall_seconds = 0.0;
  double tail_sigma = 0.0;
};

/// Called after initialization (step 0) and after every step.
using StepObserver = std::function<void(const ParticleSystemState&)>;

/// Runs the whole grid; record_times must be grid points.
SimulationResult run_simulation(const SimConfig& config, const std::vector<double>& record_times,
                                const StepObserver& observer = {});

}  // namespace mvjump
