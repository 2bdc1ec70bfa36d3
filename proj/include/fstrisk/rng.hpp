// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams.
//
// Every random number in the library comes from Philox4x32-10 (Salmon et
// al., Random123). A stream is identified by a 64-bit seed (the Philox key)
// and a 64-bit stream id. Block b of a stream is
//
//     philox4x32_10(counter = {lo(b), hi(b), lo(stream), hi(stream)},
//                   key     = {lo(seed), hi(seed)})
//
// and yields two 64-bit outputs: (w0 << 32 | w1) then (w2 << 32 | w3).
// Derived variates consume 64-bit outputs in order:
//
//   uniform()       (u >> 11) * 2^-53                      in [0, 1)
//   uniform_open()  ((u >> 11) + 0.5) * 2^-53             in (0, 1)
//   normal()        sqrt(-2 ln U1) * cos(2 pi U2), U1 open, U2 half-open
//   gamma(k)        Marsaglia-Tsang; k < 1 via gamma(k + 1) * U^(1/k)
//   beta(a, b)      X / (X + Y), X ~ gamma(a), Y ~ gamma(b)
//   binomial(n, p)  inversion when n * min(p, 1-p) < 30, otherwise
//                   Knuth's beta-splitting recursion
//   index(n)        min(floor(uniform() * n), n - 1)
//
// Any reimplementation following these rules reproduces the streams
// bit-for-bit.
#pragma once

#include <array>
#include <cstdint>

namespace fstrisk {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// One Philox4x32 block with 10 rounds.
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Domain tags occupy the top 8 bits of a stream id.
enum class StreamDomain : std::uint8_t {
  mcmc_chain = 1,
  chain_init = 2,
  replicate = 3,
  test = 0xF0,
};

constexpr std::uint64_t stream_id(StreamDomain domain, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(domain) << 56) | (index & ((std::uint64_t{1} << 56) - 1));
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform_open() noexcept;
  double normal() noexcept;
  double gamma(double shape) noexcept;
  double beta(double a, double b) noexcept;
  std::uint64_t binomial(std::uint64_t n, double p) noexcept;
  std::uint64_t index(std::uint64_t n) noexcept;

 private:
  void refill() noexcept;

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int cursor_ = 4;
};

}  // namespace fstrisk
