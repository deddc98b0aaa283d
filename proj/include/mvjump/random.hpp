#pragma once

// Counter-based random streams.
//
// Every random quantity in a simulation is read from a Philox4x32-10 stream
// whose key is derived from a structured address (purpose, particle, ring,
// block).  Streams therefore never depend on generation order or thread
// scheduling, and two runs that share addresses share randomness.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace mvjump {

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept;
};

enum class Purpose : std::uint32_t {
  Count = 0,
  Amplitude,
  Partner,
  Time,
  Init,
  Gauss,
  Smoothing,
  Residual,
  Validation,
  Direction,
  Auxiliary,
};
inline constexpr std::size_t kPurposeCount = 11;

const char* purpose_name(Purpose p) noexcept;

struct StreamAddress {
  Purpose purpose = Purpose::Auxiliary;
  std::uint64_t particle = 0;
  std::uint64_t ring = 0;
  std::uint64_t block = 0;
};

/// A sequential reader over one Philox key.  The 128-bit counter is split
/// into (draw index, ordinal): each ordinal is an independent sub-stream.
class Stream {
 public:
  using result_type = std::uint32_t;

  Stream(Philox4x32::Key key, std::uint64_t ordinal) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept { return next_u32(); }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double normal() noexcept;
  /// Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t index(std::uint64_t n) noexcept;
  std::uint64_t poisson(double mean);

 private:
  void refill() noexcept;

  Philox4x32::Key key_;
  std::uint64_t ordinal_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Maps stream addresses to keys.  Each purpose carries its own seed so a
/// single purpose can be re-randomized while all others stay fixed.
class StreamFamily {
 public:
  explicit StreamFamily(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t purpose_seed(Purpose p) const noexcept;

  /// Copy with the seed of one purpose replaced.
  StreamFamily with_purpose_seed(Purpose p, std::uint64_t seed) const;

  Stream stream(const StreamAddress& address, std::uint64_t ordinal = 0) const noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, kPurposeCount> purpose_seeds_{};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace mvjump
