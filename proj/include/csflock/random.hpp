#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

#include "csflock/errors.hpp"

namespace csflock {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// Output is a pure function of (counter, key).
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(const Counter &c, const Key &k) {
  const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr Counter block(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round(c, k);
  }
  return c;
}

} // namespace philox

/// Identity of one noise stream: one per (sweep cell, Monte-Carlo path, agent).
/// Distinct material maps to distinct Philox counters under the same key, so
/// streams never overlap.
struct SeedMaterial {
  std::uint64_t base_seed = 0;
  std::uint32_t cell = 0;
  std::uint32_t path = 0;
  std::uint32_t agent = 0;
};

/// 64-bit uniform bit generator over a Philox counter sequence. Satisfies
/// std::uniform_random_bit_generator.
class PhiloxEngine {
public:
  using result_type = std::uint64_t;

  explicit PhiloxEngine(const SeedMaterial &m)
      : key_{static_cast<std::uint32_t>(m.base_seed), static_cast<std::uint32_t>(m.base_seed >> 32)},
        agent_(m.agent), path_(m.path), cell_(m.cell) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 2) {
      refill();
    }
    return buffer_[lane_++];
  }

  std::uint64_t blocks_used() const { return block_; }

private:
  void refill() {
    if (block_ > std::numeric_limits<std::uint32_t>::max())
      throw NumericalError("noise stream exhausted its counter space");
    const auto out = philox::block({static_cast<std::uint32_t>(block_), agent_, path_, cell_}, key_);
    buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    ++block_;
    lane_ = 0;
  }

  philox::Key key_;
  std::uint32_t agent_, path_, cell_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int lane_ = 2;
};

/// Reproducible stream of standard normal deviates.
class NoiseStream {
public:
  explicit NoiseStream(const SeedMaterial &m) : engine_(m) {}

  double normal() { return dist_(engine_); }

private:
  PhiloxEngine engine_;
  boost::random::normal_distribution<double> dist_;
};

} // namespace csflock
