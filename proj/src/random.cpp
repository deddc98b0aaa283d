#include "mvjump/random.hpp"

#include <cmath>
#include <numbers>

#include "mvjump/errors.hpp"

namespace mvjump {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline Philox4x32::Counter philox_round(const Philox4x32::Counter& c,
                                        const Philox4x32::Key& k) noexcept {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  ctr = philox_round(ctr, key);
  for (int r = 1; r < 10; ++r) {
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
    ctr = philox_round(ctr, key);
  }
  return ctr;
}

const char* purpose_name(Purpose p) noexcept {
  switch (p) {
    case Purpose::Count: return "count";
    case Purpose::Amplitude: return "amp";
    case Purpose::Partner: return "partner";
    case Purpose::Time: return "time";
    case Purpose::Init: return "init";
    case Purpose::Gauss: return "gauss";
    case Purpose::Smoothing: return "smoothing";
    case Purpose::Residual: return "residual";
    case Purpose::Validation: return "validation";
    case Purpose::Direction: return "direction";
    case Purpose::Auxiliary: return "auxiliary";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Stream::Stream(Philox4x32::Key key, std::uint64_t ordinal) noexcept
    : key_(key), ordinal_(ordinal) {}

void Stream::refill() noexcept {
  const Philox4x32::Counter ctr{
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(ordinal_), static_cast<std::uint32_t>(ordinal_ >> 32)};
  buffer_ = Philox4x32::generate(ctr, key_);
  ++block_;
  used_ = 0;
}

std::uint32_t Stream::next_u32() noexcept {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

std::uint64_t Stream::next_u64() noexcept {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double Stream::uniform() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() noexcept {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Stream::index(std::uint64_t n) noexcept {
  const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

std::uint64_t Stream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw NumericError("poisson: mean must be finite and nonnegative");
  }
  if (mean == 0.0) return 0;
  if (mean < 12.0) {
    // Sequential inversion: one uniform per variate.
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  // PTRS transformed rejection (Hoermann 1993).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

StreamFamily::StreamFamily(std::uint64_t seed) : seed_(seed) {
  for (std::size_t p = 0; p < kPurposeCount; ++p) {
    purpose_seeds_[p] = splitmix64(seed ^ splitmix64(0x5EEDull + p));
  }
}

std::uint64_t StreamFamily::purpose_seed(Purpose p) const noexcept {
  return purpose_seeds_[static_cast<std::size_t>(p)];
}

StreamFamily StreamFamily::with_purpose_seed(Purpose p, std::uint64_t seed) const {
  StreamFamily copy = *this;
  copy.purpose_seeds_[static_cast<std::size_t>(p)] =
      splitmix64(seed ^ splitmix64(0x5EEDull + static_cast<std::uint64_t>(p)));
  return copy;
}

Stream StreamFamily::stream(const StreamAddress& a, std::uint64_t ordinal) const noexcept {
  std::uint64_t h = purpose_seed(a.purpose);
  h = splitmix64(h ^ a.particle);
  h = splitmix64(h ^ (a.ring * 0x9E3779B97F4A7C15ull));
  h = splitmix64(h ^ (a.block + 0x632BE59BD9B4E019ull));
  return Stream({static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)}, ordinal);
}

}  // namespace mvjump
