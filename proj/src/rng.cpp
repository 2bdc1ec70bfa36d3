// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fstrisk {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Below this mean the inversion search is cheap.
constexpr double kInversionLimit = 30.0;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline PhiloxCounter philox_round(const PhiloxCounter& ctr, const PhiloxKey& key) noexcept {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kMul0, ctr[0], hi0, lo0);
  mulhilo(kMul1, ctr[2], hi1, lo1);
  return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    counter = philox_round(counter, key);
  }
  return counter;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

void CounterRng::refill() noexcept {
  const PhiloxCounter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  buffer_ = philox4x32_10(ctr, key_);
  ++block_;
  cursor_ = 0;
}

std::uint64_t CounterRng::next_u64() noexcept {
  if (cursor_ >= 4) refill();
  const std::uint64_t value = (static_cast<std::uint64_t>(buffer_[cursor_]) << 32) | buffer_[cursor_ + 1];
  cursor_ += 2;
  return value;
}

double CounterRng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double CounterRng::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::gamma(double shape) noexcept {
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape);
  }
  // Marsaglia-Tsang. The acceptance exponent is written with log1p so it
  // stays accurate for very large shapes (binomial splitting needs those).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = normal();
    const double t = c * x;
    if (t <= -1.0) continue;
    const double v = (1.0 + t) * (1.0 + t) * (1.0 + t);
    const double log_u = std::log(uniform_open());
    const double tail = d * (3.0 * (std::log1p(t) - t) - 3.0 * t * t - t * t * t);
    if (log_u < 0.5 * x * x + tail) return d * v;
  }
}

double CounterRng::beta(double a, double b) noexcept {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

std::uint64_t CounterRng::binomial(std::uint64_t n, double p) noexcept {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;

  std::uint64_t offset = 0;
  while (static_cast<double>(n) * std::min(p, 1.0 - p) >= kInversionLimit) {
    const std::uint64_t a = 1 + n / 2;
    const std::uint64_t b = n + 1 - a;
    const double x = beta(static_cast<double>(a), static_cast<double>(b));
    if (x >= p) {
      n = a - 1;
      p = p / x;
    } else {
      offset += a;
      n = b - 1;
      p = (p - x) / (1.0 - x);
    }
    if (n == 0 || p <= 0.0) return offset;
    if (p >= 1.0) return offset + n;
  }

  const bool flipped = p > 0.5;
  const double ps = flipped ? 1.0 - p : p;
  const double qs = 1.0 - ps;
  const double ratio = ps / qs;
  const double nd = static_cast<double>(n);
  double prob = std::exp(nd * std::log1p(-ps));
  double cdf = prob;
  const double u = uniform();
  std::uint64_t x = 0;
  while (u > cdf && x < n) {
    prob *= (nd - static_cast<double>(x)) / static_cast<double>(x + 1) * ratio;
    ++x;
    cdf += prob;
    if (prob == 0.0 && static_cast<double>(x) > nd * ps) break;
  }
  return offset + (flipped ? n - x : x);
}

std::uint64_t CounterRng::index(std::uint64_t n) noexcept {
  if (n == 0) return 0;
  const auto i = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return std::min(i, n - 1);
}

}  // namespace fstrisk
