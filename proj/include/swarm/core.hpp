#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace swarm {

using Bytes = std::int64_t;
using PieceIndex = std::int32_t;
using PeerId = std::int32_t;

constexpr Bytes kKiB = 1024;
constexpr Bytes kMiB = 1024 * 1024;

// A peer received data it never asked for on that connection. This indicates
// a scheduler bug, so the simulation aborts instead of limping on.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// mt19937_64 behind explicit bit arithmetic. std:: distributions are
// implementation-defined, and reproducibility across toolchains matters more
// than a nanosecond per draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t u64() { return state_(); }

  // 53-bit mantissa uniform in [0, 1).
  double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform index in [0, n). Modulo bias is irrelevant at our n.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(u64() % n); }

 private:
  std::mt19937_64 state_;
};

}  // namespace swarm
