#include "mvjump/events.hpp"

#include <cmath>
#include <sstream>

#include "mvjump/errors.hpp"
#include "mvjump/parallel.hpp"

namespace mvjump {

namespace {

constexpr std::size_t kChunk = 512;

struct ChunkEvents {
  std::vector<std::size_t> counts;
  std::vector<std::uint32_t> ring;
  std::vector<std::uint32_t> ordinal;
  std::vector<std::uint64_t> partner;
  std::vector<double> amplitude;
  std::vector<double> time;
};

}  // namespace

EventList::EventList(std::size_t particles, std::size_t dim)
    : dim_(dim), offsets_(particles + 1, 0) {}

EventList generate_step_events(const LevyMeasureModel& levy, std::size_t N, std::size_t M,
                               double dt, const StreamFamily& streams, double step_begin,
                               const StepWindow& window, const EventOptions& options) {
  if (N == 0) throw ConfigError("generate_step_events: N must be >= 1");
  if (!(dt >= 0.0)) throw ConfigError("generate_step_events: dt must be >= 0");
  if (M > levy.max_ring()) {
    std::ostringstream msg;
    msg << "generate_step_events: ring cutoff " << M << " exceeds max_ring " << levy.max_ring();
    throw ConfigError(msg.str());
  }
  if (window.level > 30 || window.sub >> window.level != 0) {
    throw ConfigError("generate_step_events: invalid step window");
  }

  const std::size_t d = levy.dimension();
  EventList list(N, d);
  list.step_begin = step_begin;
  list.step_length = dt;
  list.seed = streams.seed();
  list.window = window;
  list.times_sampled_ = window.level > 0 || options.sample_jump_times;
  if (dt == 0.0 || M == 0) return list;

  const double slots = std::ldexp(1.0, static_cast<int>(window.level));
  const double block_length = dt * slots;
  const bool thinning = window.level > 0;
  const bool want_times = thinning || options.sample_jump_times;

  std::vector<double> rates(M);
  for (std::size_t k = 1; k <= M; ++k) rates[k - 1] = levy.annulus_mass(k) * block_length;

  const std::size_t chunks = (N + kChunk - 1) / kChunk;
  std::vector<ChunkEvents> parts(chunks);

  parallel_chunks(N, kChunk, options.threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    ChunkEvents& out = parts[c];
    out.counts.assign(hi - lo, 0);
    Vec z(d);
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t k = 1; k <= M; ++k) {
        if (!(rates[k - 1] > 0.0)) continue;
        const StreamAddress at{Purpose::Count, i, k, window.block};
        const std::uint64_t n = streams.stream(at).poisson(rates[k - 1]);
        for (std::uint64_t e = 0; e < n; ++e) {
          double offset = 0.0;
          if (want_times) {
            const double tau = streams.stream({Purpose::Time, i, k, window.block}, e).uniform();
            const double scaled = tau * slots;
            const double slot = std::min(std::floor(scaled), slots - 1.0);
            if (thinning && slot != static_cast<double>(window.sub)) continue;
            offset = (scaled - static_cast<double>(window.sub)) * dt;
          }
          Stream amp = streams.stream({Purpose::Amplitude, i, k, window.block}, e);
          levy.sample_in_annulus(k, amp, z);
          Stream partner = streams.stream({Purpose::Partner, i, k, window.block}, e);
          out.ring.push_back(static_cast<std::uint32_t>(k));
          out.ordinal.push_back(static_cast<std::uint32_t>(e));
          out.partner.push_back(partner.index(N));
          out.amplitude.insert(out.amplitude.end(), z.begin(), z.end());
          if (want_times) out.time.push_back(offset);
          ++out.counts[i - lo];
        }
      }
    }
  });

  std::size_t total = 0;
  for (const auto& p : parts) total += p.ring.size();
  list.ring_.reserve(total);
  list.ordinal_.reserve(total);
  list.partner_.reserve(total);
  list.amplitude_.reserve(total * d);
  if (want_times) list.time_.reserve(total);
  std::size_t i = 0;
  for (const auto& p : parts) {
    for (std::size_t c : p.counts) {
      list.offsets_[i + 1] = list.offsets_[i] + c;
      ++i;
    }
    list.ring_.insert(list.ring_.end(), p.ring.begin(), p.ring.end());
    list.ordinal_.insert(list.ordinal_.end(), p.ordinal.begin(), p.ordinal.end());
    list.partner_.insert(list.partner_.end(), p.partner.begin(), p.partner.end());
    list.amplitude_.insert(list.amplitude_.end(), p.amplitude.begin(), p.amplitude.end());
    list.time_.insert(list.time_.end(), p.time.begin(), p.time.end());
  }
  return list;
}

}  // namespace mvjump
