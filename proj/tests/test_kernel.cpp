#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pklab/kernel.hpp"
#include "pklab/lattice.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pklab;
using fixtures::contains;
using fixtures::thrown_message;

namespace {

// G_i = 1 - 2^-i on a deterministic chain; increments are 2^-i.
IncreasingDriver geometric_driver(const LatticeSpace& s, bool with_tail) {
  const int m = s.horizon();
  AdaptedProcess g(s, 1, m);
  for (int i = 1; i <= m; ++i) g.at(i, 0) = std::pow(2.0, -i);
  std::vector<double> tail;
  if (with_tail) tail.assign(1, std::pow(2.0, -m));
  return driver_from_increments(g, tail);
}

}  // namespace

TEST_SUITE_BEGIN("kernel");

TEST_CASE("geometric chain driver prices exactly") {
  const auto s = LatticeSpace::chain(TimeGrid::uniform(0.0, 1.0, 8));

  SUBCASE("positive tail extends to the full horizon") {
    const auto bundle = kernel_from_driver(geometric_driver(s, true));
    CHECK(bundle.pi.last_index() == 8);
    for (int i = 0; i <= 8; ++i) {
      CHECK(bundle.pi.at(i, 0) == std::pow(2.0, -i));  // exact dyadic
      CHECK(bundle.rhobar.at(i, 0) == 1.0);
      CHECK(bundle.Bbar.at(i, 0) == std::pow(2.0, i));
      if (i >= 1) CHECK(bundle.rbar.at(i, 0) == 1.0);
    }
  }

  SUBCASE("zero tail prices one index short") {
    const auto bundle = kernel_from_driver(geometric_driver(s, false));
    CHECK(bundle.pi.last_index() == 7);
    for (int i = 0; i <= 7; ++i) {
      const double expected = std::pow(2.0, -i) - std::pow(2.0, -8);
      CHECK(bundle.pi.at(i, 0) ==
            doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("random tree driver yields a valid kernel bundle") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 6), 0.5);
  const auto g = fixtures::random_increments(s, 11, 0.25);
  std::vector<double> tail(s.node_count(6), 0.8);
  const auto bundle = kernel_from_driver(driver_from_increments(g, tail));

  CHECK(bundle.pi.last_index() == 6);
  CHECK(is_strict_supermartingale(bundle.pi, 1e-12));
  CHECK(is_martingale(bundle.rhobar, 1e-12));
  CHECK(bundle.rhobar.at(0, 0) == bundle.pi.at(0, 0));

  // Positive-return account grows along every branch.
  for (int i = 1; i <= 6; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      CHECK(bundle.rbar.at(i, v) > 0.0);
      CHECK(bundle.Bbar.at(i, v) > bundle.Bbar.at(i - 1, v >> 1));
    }

  // The kernel is a potential once its truncation tail is declared.
  const double tail_mass = expect(bundle.pi, 6);
  CHECK(is_potential(bundle.pi, tail_mass + 1e-12));
  CHECK_FALSE(is_potential(bundle.pi, tail_mass / 2.0));

  // Driver round trip: accumulated pi * rbar recovers the driver.
  const auto gains = accumulate_rate_gains(bundle.pi, bundle.rbar);
  const auto driver = driver_from_increments(g, tail);
  for (int i = 0; i <= 6; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v)
      CHECK(gains.at(i, v) ==
            doctest::Approx(driver.G.at(i, v)).epsilon(1e-13));
}

TEST_CASE("driver validation") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 3), 0.5);

  SUBCASE("flat increment is rejected") {
    AdaptedProcess g = fixtures::random_increments(s, 3, 0.2);
    g.at(2, 1) = 0.0;
    CHECK(contains(
        thrown_message([&] { kernel_from_driver(driver_from_increments(g)); }),
        "strictly increasing"));
  }
  SUBCASE("mixed tail is rejected") {
    const auto g = fixtures::random_increments(s, 3, 0.2);
    std::vector<double> tail(s.node_count(3), 0.5);
    tail[2] = 0.0;
    CHECK(contains(
        thrown_message(
            [&] { kernel_from_driver(driver_from_increments(g, tail)); }),
        "all zero or strictly positive"));
  }
  SUBCASE("negative tail is rejected") {
    const auto g = fixtures::random_increments(s, 3, 0.2);
    std::vector<double> tail(s.node_count(3), -0.1);
    CHECK_THROWS_AS(kernel_from_driver(driver_from_increments(g, tail)),
                    std::invalid_argument);
  }
  SUBCASE("nonzero start is rejected") {
    IncreasingDriver d{AdaptedProcess::constant(s, 1.0, 0, 3), {}};
    CHECK(contains(thrown_message([&] { d.validate(); }), "start at zero"));
  }
  SUBCASE("one period with zero tail cannot price") {
    const auto s1 =
        LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 1), 0.5);
    const auto g = fixtures::random_increments(s1, 5, 0.2);
    CHECK(contains(
        thrown_message([&] { kernel_from_driver(driver_from_increments(g)); }),
        "too short"));
  }
}

TEST_CASE("level-deterministic drivers work on merged lattices") {
  const auto s = LatticeSpace::binomial_recombining(
      TimeGrid::uniform(0.0, 1.0, 8), 0.5);
  AdaptedProcess g(s, 1, 8);
  for (int i = 1; i <= 8; ++i)
    for (double& v : g.level(i)) v = std::pow(2.0, -i);
  std::vector<double> tail(s.node_count(8), std::pow(2.0, -8));
  const auto bundle = kernel_from_driver(driver_from_increments(g, tail));
  for (int i = 0; i <= 8; ++i)
    for (NodeId k = 0; k < s.node_count(i); ++k)
      CHECK(bundle.pi.at(i, k) == std::pow(2.0, -i));
}

TEST_CASE("path-dependent drivers on merged lattices are rejected") {
  const auto s = LatticeSpace::binomial_recombining(
      TimeGrid::uniform(0.0, 1.0, 4), 0.5);
  const auto g = fixtures::random_increments(s, 17, 0.3);
  CHECK(contains(thrown_message([&] { driver_from_increments(g); }),
                 "path-dependent"));
}

TEST_CASE("doob decomposition of the geometric chain") {
  const auto s = LatticeSpace::chain(TimeGrid::uniform(0.0, 1.0, 10));
  AdaptedProcess pi(s, 0, 10);
  for (int i = 0; i <= 10; ++i) pi.at(i, 0) = std::pow(2.0, -i);
  const auto parts = doob_decompose(pi);
  for (int i = 0; i <= 10; ++i) {
    CHECK(parts.A.at(i, 0) == 1.0 - std::pow(2.0, -i));  // exact dyadic
    CHECK(parts.Y.at(i, 0) == 1.0);
    // pi_i = E_i[A_inf] - A_i with A_inf -> 1 at infinite horizon; at the
    // finite horizon the remaining mass is E_i[A_N] + pi_N-tail.
  }
}

TEST_CASE("doob decomposition on a random tree kernel") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 6), 0.5);
  const auto g = fixtures::random_increments(s, 29, 0.3);
  std::vector<double> tail(s.node_count(6), 0.5);
  const auto bundle = kernel_from_driver(driver_from_increments(g, tail));
  const auto parts = doob_decompose(bundle.pi);

  CHECK(is_martingale(parts.Y, 1e-12));

  for (int i = 0; i <= 6; ++i) {
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      CHECK(parts.Y.at(i, v) - parts.A.at(i, v) ==
            doctest::Approx(bundle.pi.at(i, v)).epsilon(1e-14));
      if (i >= 1) {
        // Previsible: siblings share the value bitwise.
        CHECK(parts.A.at(i, v) == parts.A.at(i, v ^ 1u));
        // Increasing along paths.
        CHECK(parts.A.at(i, v) >= parts.A.at(i - 1, v >> 1));
      }
    }
  }

  // pi_i = E_i[A_N] - A_i + E_i[pi_N]: the compensator plus the declared
  // tail reproduces the kernel.
  AdaptedProcess closing(s, 6, 6);
  for (NodeId v = 0; v < s.node_count(6); ++v)
    closing.at(6, v) = parts.A.at(6, v) + bundle.pi.at(6, v);
  const auto surf = expectation_surface(closing, 6);
  for (int i = 0; i <= 6; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v)
      CHECK(surf.at(i, v) - parts.A.at(i, v) ==
            doctest::Approx(bundle.pi.at(i, v)).epsilon(1e-12));
}

TEST_CASE("doob decomposition is degenerate for martingales") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 5), 0.5);
  const auto x = fixtures::random_positive_martingale(s, 31, 0.25);
  const auto parts = doob_decompose(x);
  for (int i = 0; i <= 5; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      CHECK(parts.A.at(i, v) == 0.0);
      CHECK(parts.Y.at(i, v) == x.at(i, v));
    }
}

TEST_CASE("doob decomposition rejects submartingales") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 4), 0.5);
  AdaptedProcess x(s, 0, 4);
  for (int i = 0; i <= 4; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v) x.at(i, v) = 1.0 + 0.2 * i;
  CHECK(contains(thrown_message([&] { doob_decompose(x); }),
                 "not a supermartingale"));
}

TEST_CASE("perturbing the compensator breaks the decomposition") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 5), 0.5);
  const auto g = fixtures::random_increments(s, 41, 0.3);
  std::vector<double> tail(s.node_count(5), 0.4);
  const auto bundle = kernel_from_driver(driver_from_increments(g, tail));
  const auto parts = doob_decompose(bundle.pi);

  AdaptedProcess a2 = parts.A;
  a2.at(3, 4) += 1e-3;
  AdaptedProcess y2(s, 0, 5);
  for (int i = 0; i <= 5; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v)
      y2.at(i, v) = bundle.pi.at(i, v) + a2.at(i, v);

  const bool previsible_broken = a2.at(3, 4) != a2.at(3, 5);
  const bool martingale_broken = !is_martingale(y2, 1e-6);
  CHECK((previsible_broken || martingale_broken));
  CHECK(previsible_broken);  // sibling values no longer agree
  CHECK(martingale_broken);  // and Y picks up the drift
}

TEST_CASE("conditional-tail form rebuilds the kernel") {
  const auto chain = LatticeSpace::chain(TimeGrid::uniform(0.0, 1.0, 8));
  const auto cb = kernel_from_driver(geometric_driver(chain, true));
  std::vector<double> exact_tail{cb.pi.at(8, 0)};
  const auto rebuilt = kernel_as_conditional_tail(cb.pi, cb.rbar, exact_tail);
  for (int i = 0; i <= 8; ++i)
    CHECK(rebuilt.at(i, 0) == cb.pi.at(i, 0));  // exact dyadic telescoping

  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 6), 0.5);
  const auto g = fixtures::random_increments(s, 53, 0.25);
  std::vector<double> tail(s.node_count(6), 0.7);
  const auto bundle = kernel_from_driver(driver_from_increments(g, tail));

  SUBCASE("exact tail") {
    const auto pl = bundle.pi.level(6);
    const std::vector<double> t(pl.begin(), pl.end());
    const auto r = kernel_as_conditional_tail(bundle.pi, bundle.rbar, t);
    for (int i = 0; i <= 6; ++i)
      for (NodeId v = 0; v < s.node_count(i); ++v)
        CHECK(r.at(i, v) == doctest::Approx(bundle.pi.at(i, v)).epsilon(1e-11));
  }

  SUBCASE("zero tail understates by exactly the expected horizon value") {
    const std::vector<double> zeros(s.node_count(6), 0.0);
    const auto r = kernel_as_conditional_tail(bundle.pi, bundle.rbar, zeros);
    AdaptedProcess horizon(s, 6, 6);
    for (NodeId v = 0; v < s.node_count(6); ++v)
      horizon.at(6, v) = bundle.pi.at(6, v);
    const auto surf = expectation_surface(horizon, 6);
    for (int i = 0; i <= 6; ++i)
      for (NodeId v = 0; v < s.node_count(i); ++v)
        CHECK(bundle.pi.at(i, v) - r.at(i, v) ==
              doctest::Approx(surf.at(i, v)).epsilon(1e-12));
  }
}

TEST_CASE("short-rate form rebuilds the kernel") {
  const auto chain = LatticeSpace::chain(TimeGrid::uniform(0.0, 1.0, 8));
  const auto cb = kernel_from_driver(geometric_driver(chain, true));
  const auto r0 = kernel_short_rate_form(cb.pi, {cb.pi.at(8, 0)});
  for (int i = 0; i <= 8; ++i) CHECK(r0.at(i, 0) == cb.pi.at(i, 0));

  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 6), 0.5);
  const auto g = fixtures::random_increments(s, 67, 0.25);
  std::vector<double> tail(s.node_count(6), 0.6);
  const auto bundle = kernel_from_driver(driver_from_increments(g, tail));
  const auto pl = bundle.pi.level(6);
  const auto rebuilt = kernel_short_rate_form(
      bundle.pi, std::vector<double>(pl.begin(), pl.end()));
  for (int i = 0; i <= 6; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v)
      CHECK(rebuilt.at(i, v) ==
            doctest::Approx(bundle.pi.at(i, v)).epsilon(1e-11));

  const auto mart = fixtures::random_positive_martingale(s, 71, 0.2);
  CHECK(contains(
      thrown_message([&] {
        const auto ml = mart.level(6);
        kernel_short_rate_form(mart,
                               std::vector<double>(ml.begin(), ml.end()));
      }),
      "positive short rate"));
}

TEST_SUITE_END();
