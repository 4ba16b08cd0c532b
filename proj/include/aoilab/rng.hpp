#pragma once

#include <cmath>
#include <cstdint>

namespace aoilab {

// Counter-based random streams. Every draw is a pure function of
// (seed, replication, stream, id, slot, draw_index), so replications can run
// on any number of workers in any order and still produce identical numbers.
//
// Stream layout used across the library:
//   kChannel  id = channel index      slot = time slot, draws 0 (success) / 1 (markov step)
//   kXi       id = 0                  slot = time slot, draws = objective noise pulls
//   kLambda   id = agent index        slot = time slot, draws = per-coordinate pulls
//   kInit     id = channel index      slot = 0,         draw 0 = markov initial state
//   kSelftest id = case index         free-form
enum class Stream : std::uint64_t {
  kChannel = 1,
  kXi = 2,
  kLambda = 3,
  kInit = 4,
  kSelftest = 5,
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t chain(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

}  // namespace detail

struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  Stream stream = Stream::kSelftest;
  std::uint64_t id = 0;

  std::uint64_t word(std::uint64_t slot, std::uint64_t draw) const {
    std::uint64_t h = detail::mix64(seed);
    h = detail::chain(h, replication);
    h = detail::chain(h, static_cast<std::uint64_t>(stream));
    h = detail::chain(h, id);
    h = detail::chain(h, slot);
    h = detail::chain(h, draw);
    return h;
  }

  // Uniform on (0,1), never exactly 0 or 1.
  double uniform01(std::uint64_t slot, std::uint64_t draw) const {
    const std::uint64_t w = word(slot, draw) >> 11;
    return (static_cast<double>(w) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p, std::uint64_t slot, std::uint64_t draw) const {
    return uniform01(slot, draw) < p;
  }

  // Box-Muller; consumes draw indices 2*draw and 2*draw+1.
  double gaussian(std::uint64_t slot, std::uint64_t draw) const {
    const double u1 = uniform01(slot, 2 * draw);
    const double u2 = uniform01(slot, 2 * draw + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace aoilab
