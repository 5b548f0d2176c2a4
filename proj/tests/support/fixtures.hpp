#pragma once

// Deterministic random fixtures shared by the test suites.  Seeds are
// fixed in the tests so every run exercises identical inputs.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pklab/lattice.hpp"

namespace fixtures {

// Process with independent uniform(lo, hi) node values.
inline pklab::AdaptedProcess random_process(const pklab::LatticeSpace& s,
                                            int first, int last,
                                            std::uint64_t seed, double lo,
                                            double hi) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  pklab::AdaptedProcess x(s, first, last);
  for (int i = first; i <= last; ++i)
    for (double& v : x.level(i)) v = dist(eng);
  return x;
}

// Strictly positive increments exp(scale * z) on [1, N].
inline pklab::AdaptedProcess random_increments(const pklab::LatticeSpace& s,
                                               std::uint64_t seed,
                                               double scale) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  pklab::AdaptedProcess g(s, 1, s.horizon());
  for (int i = 1; i <= s.horizon(); ++i)
    for (double& v : g.level(i)) v = std::exp(scale * dist(eng));
  return g;
}

// Strictly positive martingale built backward: terminal values are
// independent lognormal, earlier values are the conditional expectations.
inline pklab::AdaptedProcess random_positive_martingale(
    const pklab::LatticeSpace& s, std::uint64_t seed, double scale) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int n = s.horizon();
  pklab::AdaptedProcess x(s, n, n);
  for (double& v : x.level(n)) v = std::exp(scale * dist(eng));
  return pklab::expectation_surface(x, n);
}

// Message of the exception thrown by f; empty string when f does not throw.
template <typename F>
std::string thrown_message(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

inline bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace fixtures
