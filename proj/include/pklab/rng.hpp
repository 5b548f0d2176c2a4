#pragma once

// Counter-based random streams. Every (seed, stream, path) triple is hashed
// into an independent starting counter, so simulations can draw any path in
// isolation and still reproduce a full ensemble byte for byte.

#include <cstdint>

namespace pklab {

// One step of the splitmix64 sequence: advances x and returns the output.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }
  result_type operator()() { return splitmix64(state_); }

 private:
  std::uint64_t state_;
};

// Stream key for a given (seed, stream, path). Each component passes through
// the splitmix64 finalizer before mixing so adjacent indices do not land on
// overlapping counter ranges.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t path) {
  std::uint64_t x = seed;
  std::uint64_t k = splitmix64(x);
  x = k ^ stream;
  k = splitmix64(x);
  x = k ^ path;
  return splitmix64(x);
}

inline CounterRng stream_rng(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t path) {
  return CounterRng(stream_key(seed, stream, path));
}

}  // namespace pklab
