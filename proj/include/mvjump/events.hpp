#pragma once

// Jump events of one time step of the particle system.
//
// For particle i and ring k the events of a step are drawn from streams
// addressed by (purpose, i, k, block).  A block is 2^level consecutive steps
// of a uniform grid: the Poisson count covers the whole block, each event
// gets a uniform position inside the block, and a step keeps the events that
// fall in its sub-interval.  Runs whose grids nest inside the same blocks
// therefore share their jumps (common random numbers).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvjump/levy_model.hpp"
#include "mvjump/random.hpp"

namespace mvjump {

/// Position of a step inside its common-random-number block.
struct StepWindow {
  std::uint64_t block = 0;
  std::uint32_t level = 0;  ///< block = 2^level steps
  std::uint64_t sub = 0;    ///< 0 <= sub < 2^level

  static StepWindow of_step(std::uint64_t step, std::uint32_t level) {
    return {step >> level, level, step & ((std::uint64_t{1} << level) - 1)};
  }

  bool operator==(const StepWindow&) const = default;
};

struct EventOptions {
  unsigned threads = 1;
  /// Draw within-step jump times even when the window does not need them.
  bool sample_jump_times = false;
};

class EventList {
 public:
  EventList() = default;
  EventList(std::size_t particles, std::size_t dim);

  std::size_t particles() const noexcept { return offsets_.size() - 1; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t total() const noexcept { return ring_.size(); }

  /// Events of particle i occupy [begin(i), end(i)).
  std::size_t begin(std::size_t i) const noexcept { return offsets_[i]; }
  std::size_t end(std::size_t i) const noexcept { return offsets_[i + 1]; }
  std::size_t count(std::size_t i) const noexcept { return end(i) - begin(i); }

  std::uint32_t ring(std::size_t e) const noexcept { return ring_[e]; }
  /// Draw order of the event inside its (particle, ring, block) streams.
  std::uint32_t ordinal(std::size_t e) const noexcept { return ordinal_[e]; }
  std::uint64_t partner(std::size_t e) const noexcept { return partner_[e]; }
  Point amplitude(std::size_t e) const noexcept { return {amplitude_.data() + e * dim_, dim_}; }
  bool has_times() const noexcept { return times_sampled_; }
  /// Offset of the jump from the step start; only with sampled times.
  double time(std::size_t e) const noexcept { return time_[e]; }

  double step_begin = 0.0;
  double step_length = 0.0;
  std::uint64_t seed = 0;
  StepWindow window;

  bool operator==(const EventList&) const = default;

 private:
  friend EventList generate_step_events(const LevyMeasureModel&, std::size_t, std::size_t, double,
                                        const StreamFamily&, double, const StepWindow&,
                                        const EventOptions&);

  std::size_t dim_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> ring_;
  std::vector<std::uint32_t> ordinal_;
  std::vector<std::uint64_t> partner_;
  std::vector<double> amplitude_;
  std::vector<double> time_;
  bool times_sampled_ = false;
};

/// Events on [step_begin, step_begin + dt) for N particles and rings 1..M.
/// Partners are uniform on {0, ..., N-1} (the particle itself included).
EventList generate_step_events(const LevyMeasureModel& levy, std::size_t N, std::size_t M,
                               double dt, const StreamFamily& streams, double step_begin = 0.0,
                               const StepWindow& window = {}, const EventOptions& options = {});

}  // namespace mvjump
