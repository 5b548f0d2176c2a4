#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pklab/inflation.hpp"
#include "pklab/infoflow.hpp"
#include "pklab/lattice.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pklab;
using fixtures::contains;
using fixtures::thrown_message;

namespace {

// Random strictly positive exogenous processes on the full grid.
struct Exogenous {
  AdaptedProcess k;
  AdaptedProcess M;
  AdaptedProcess lambda;
};

Exogenous random_exogenous(const LatticeSpace& s, std::uint64_t seed) {
  return {fixtures::random_process(s, 0, s.horizon(), seed, 0.5, 4.0),
          fixtures::random_process(s, 0, s.horizon(), seed + 1, 1.0, 6.0),
          fixtures::random_process(s, 0, s.horizon(), seed + 2, 0.2, 2.0)};
}

}  // namespace

TEST_SUITE_BEGIN("inflation");

TEST_CASE("log utility worked example") {
  const auto u = UtilitySpec::log_separable(1.0, 2.0);
  // C = (A/B) lambda M / k with all inputs dyadic.
  CHECK(price_level(u, 4.0, 8.0, 0.5) == 0.5);

  const auto s = LatticeSpace::chain(TimeGrid::uniform(0.0, 1.0, 4));
  const auto econ = build_economy(
      u, AdaptedProcess::constant(s, 4.0, 0, 4),
      AdaptedProcess::constant(s, 8.0, 0, 4),
      AdaptedProcess::constant(s, 0.5, 0, 4), 0.0, 1.0);
  for (int i = 0; i <= 4; ++i) {
    CHECK(econ.C.at(i, 0) == 0.5);
    CHECK(econ.l.at(i, 0) == 8.0);            // real benefit lambda M / C
    CHECK(econ.pi.at(i, 0) == 0.5);           // B / (mu lambda M)
    CHECK(econ.pi_real.at(i, 0) == 0.25);     // pi C
  }
  const auto foc = foc_residuals(u, econ);
  CHECK(foc.x.max_deviation == 0.0);
  CHECK(foc.y.max_deviation == 0.0);
}

TEST_CASE("power utility worked example") {
  // p = 1/2, q = -1: C = (A/B)^{1/2} lambda M k^{-1/4}.
  const auto u = UtilitySpec::power(4.0, 9.0, 0.5, -1.0);
  const double C = price_level(u, 16.0, 3.0, 2.0);
  CHECK(C == doctest::Approx(2.0).epsilon(1e-15));
  const double l = 2.0 * 3.0 / C;
  CHECK(l == doctest::Approx(3.0).epsilon(1e-15));
  // Both marginals equal one at the optimum: U_x = 4/sqrt(16), U_y = 9/3^2.
  CHECK(u.Ux(16.0, l) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(u.Uy(16.0, l) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("generic solver reproduces the closed forms") {
  SUBCASE("log marginals") {
    const auto closed = UtilitySpec::log_separable(1.5, 0.7);
    const auto generic = UtilitySpec::generic(closed.Ux, closed.Uy);
    for (double k : {0.3, 1.0, 5.0})
      for (double M : {0.5, 2.0})
        for (double lam : {0.25, 1.5})
          CHECK(price_level(generic, k, M, lam) ==
                doctest::Approx(price_level(closed, k, M, lam))
                    .epsilon(1e-12));
  }
  SUBCASE("power marginals") {
    const auto closed = UtilitySpec::power(2.0, 3.0, -0.5, 0.4);
    const auto generic = UtilitySpec::generic(closed.Ux, closed.Uy);
    for (double k : {0.3, 1.0, 5.0})
      CHECK(price_level(generic, k, 2.0, 0.8) ==
            doctest::Approx(price_level(closed, k, 2.0, 0.8))
                .epsilon(1e-12));
  }
  SUBCASE("shape violations are rejected") {
    CHECK(contains(thrown_message([] {
                     UtilitySpec::generic(
                         [](double x, double) { return x; },  // increasing
                         [](double, double y) { return 1.0 / y; });
                   }),
                   "U_x must decrease"));
    CHECK(contains(thrown_message([] {
                     UtilitySpec::generic(
                         [](double, double) { return -1.0; },
                         [](double, double y) { return 1.0 / y; });
                   }),
                   "U_x must be finite and > 0"));
  }
}

TEST_CASE("first-order conditions hold on a random tree") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 0.5, 5), 0.45);
  const auto ex = random_exogenous(s, 311);
  const double gamma = 0.15;
  const double mu = 0.8;

  SUBCASE("log") {
    const auto u = UtilitySpec::log_separable(1.2, 0.9);
    const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, gamma, mu);
    const auto foc = foc_residuals(u, econ);
    CHECK(foc.x.max_deviation <= 1e-12);
    CHECK(foc.y.max_deviation <= 1e-12);
  }
  SUBCASE("power") {
    const auto u = UtilitySpec::power(1.2, 0.9, 0.3, -2.0);
    const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, gamma, mu);
    const auto foc = foc_residuals(u, econ);
    CHECK(foc.x.max_deviation <= 1e-12);
    CHECK(foc.y.max_deviation <= 1e-12);
  }
  SUBCASE("generic route stays within the solver tolerance") {
    const auto closed = UtilitySpec::power(1.2, 0.9, 0.3, -2.0);
    const auto u = UtilitySpec::generic(closed.Ux, closed.Uy);
    const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, gamma, mu);
    const auto foc = foc_residuals(u, econ);
    CHECK(foc.x.max_deviation <= 1e-12);  // pi is built from U_x directly
    CHECK(foc.y.max_deviation <= 1e-9);   // limited by the bisection
  }
  SUBCASE("a perturbed kernel is localized") {
    const auto u = UtilitySpec::log_separable(1.2, 0.9);
    auto econ = build_economy(u, ex.k, ex.M, ex.lambda, gamma, mu);
    econ.pi.at(2, 3) *= 1.0 + 1e-6;
    const auto foc = foc_residuals(u, econ);
    CHECK(foc.x.index == 2);
    CHECK(foc.x.node == 3);
    CHECK(foc.x.max_deviation == doctest::Approx(1e-6).epsilon(1e-3));
  }
}

TEST_CASE("budget multiplier") {
  SUBCASE("unit multiplier with dyadic inputs") {
    // Log utility with A = B = 1 makes U_x (k + l) = 2 at every node, so
    // five dates at gamma = 0 against wealth 10 give mu = 1 exactly.
    const auto s = LatticeSpace::chain(TimeGrid::uniform(0.0, 1.0, 4));
    const auto u = UtilitySpec::log_separable(1.0, 1.0);
    const auto k = AdaptedProcess::constant(s, 1.0, 0, 4);
    const auto M = AdaptedProcess::constant(s, 2.0, 0, 4);
    const auto lam = AdaptedProcess::constant(s, 1.0, 0, 4);
    CHECK(solve_mu(u, k, M, lam, 0.0, 10.0) == 1.0);
  }
  SUBCASE("random tree still yields an exact budget") {
    const auto s =
        LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 4), 0.5);
    const auto ex = random_exogenous(s, 331);
    const auto u = UtilitySpec::log_separable(1.0, 1.0);
    CHECK(solve_mu(u, ex.k, ex.M, ex.lambda, 0.0, 10.0) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("budget closes under the solved multiplier") {
    const auto s =
        LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 0.5, 5), 0.4);
    const auto ex = random_exogenous(s, 337);
    const double gamma = 0.2;
    const double wealth = 25.0;
    for (const auto& u : {UtilitySpec::log_separable(1.3, 0.8),
                          UtilitySpec::power(1.3, 0.8, 0.4, -1.5)}) {
      const double mu = solve_mu(u, ex.k, ex.M, ex.lambda, gamma, wealth);
      const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, gamma, mu);
      CHECK(budget_value(econ) ==
            doctest::Approx(wealth).epsilon(1e-13));
    }
  }
}

TEST_CASE("claim values in the log model") {
  SUBCASE("worked example") {
    const TimeGrid grid({0.0, 1.0});
    const auto s = LatticeSpace::binomial_tree(grid, 0.5);
    const auto u = UtilitySpec::log_separable(1.0, 1.0);
    AdaptedProcess M(s, 0, 1);
    M.at(0, 0) = 1.0;
    M.at(1, 0) = 2.0;
    M.at(1, 1) = 2.0;
    const auto econ = build_economy(
        u, AdaptedProcess::constant(s, 1.0, 0, 1), M,
        AdaptedProcess::constant(s, 1.0, 0, 1), 0.0, 1.0);
    const std::vector<double> payoff = {4.0, 4.0};
    CHECK(price_claim(u, econ, 1, payoff) == 2.0);

    const auto discounted = build_economy(
        u, AdaptedProcess::constant(s, 1.0, 0, 1), M,
        AdaptedProcess::constant(s, 1.0, 0, 1), std::log(2.0), 1.0);
    CHECK(price_claim(u, discounted, 1, payoff) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("closed form agrees with the kernel route") {
    const auto s =
        LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 0.5, 6), 0.5);
    const auto ex = random_exogenous(s, 347);
    const auto u = UtilitySpec::log_separable(1.1, 0.6);
    const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, 0.2, 0.9);
    for (int j : {1, 3, 6}) {
      std::vector<double> payoff(s.node_count(j));
      for (NodeId v = 0; v < s.node_count(j); ++v)
        payoff[v] = 1.0 + ex.M.at(j, v);
      double kernel_route = 0.0;
      for (NodeId v = 0; v < s.node_count(j); ++v)
        kernel_route += s.node_prob(j, v) * econ.pi.at(j, v) * payoff[v];
      kernel_route /= econ.pi.at(0, 0);
      CHECK(price_claim(u, econ, j, payoff) ==
            doctest::Approx(kernel_route).epsilon(1e-11));
    }
  }
}

TEST_CASE("claim values in the power model agree with the kernel route") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 0.5, 6), 0.45);
  const auto ex = random_exogenous(s, 353);
  const auto u = UtilitySpec::power(1.1, 0.6, 0.5, -1.0);
  const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, 0.1, 1.2);
  for (int j : {2, 5}) {
    std::vector<double> payoff(s.node_count(j));
    for (NodeId v = 0; v < s.node_count(j); ++v)
      payoff[v] = 0.5 + ex.k.at(j, v);
    double kernel_route = 0.0;
    for (NodeId v = 0; v < s.node_count(j); ++v)
      kernel_route += s.node_prob(j, v) * econ.pi.at(j, v) * payoff[v];
    kernel_route /= econ.pi.at(0, 0);
    CHECK(price_claim(u, econ, j, payoff) ==
          doctest::Approx(kernel_route).epsilon(1e-11));
  }
}

TEST_CASE("velocity of money") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 5), 0.5);
  const auto ex = random_exogenous(s, 359);

  // Log utility ties velocity to the liquidity benefit: k C / M = (A/B) l.
  const auto u = UtilitySpec::log_separable(1.4, 0.7);
  const auto econ = build_economy(u, ex.k, ex.M, ex.lambda, 0.0, 1.0);
  const auto v = velocity(econ);
  for (int i = 0; i <= 5; ++i)
    for (NodeId w = 0; w < s.node_count(i); ++w)
      CHECK(v.at(i, w) ==
            doctest::Approx((1.4 / 0.7) * ex.lambda.at(i, w)).epsilon(1e-12));
}

TEST_CASE("log-model valuations ignore consumption") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 4), 0.5);
  const auto ex = random_exogenous(s, 367);
  const auto other_k =
      fixtures::random_process(s, 0, s.horizon(), 555, 2.0, 9.0);
  const auto u = UtilitySpec::log_separable(1.0, 2.0);
  const auto a = build_economy(u, ex.k, ex.M, ex.lambda, 0.1, 1.0);
  const auto b = build_economy(u, other_k, ex.M, ex.lambda, 0.1, 1.0);

  std::vector<double> payoff(s.node_count(3));
  for (NodeId v = 0; v < s.node_count(3); ++v)
    payoff[v] = 2.0 + ex.lambda.at(3, v);
  // The closed form never reads consumption.
  CHECK(price_claim(u, a, 3, payoff) == price_claim(u, b, 3, payoff));
  // The kernel route cancels it only up to rounding.
  double ra = 0.0;
  double rb = 0.0;
  for (NodeId v = 0; v < s.node_count(3); ++v) {
    ra += s.node_prob(3, v) * a.pi.at(3, v) * payoff[v];
    rb += s.node_prob(3, v) * b.pi.at(3, v) * payoff[v];
  }
  ra /= a.pi.at(0, 0);
  rb /= b.pi.at(0, 0);
  CHECK(ra == doctest::Approx(rb).epsilon(1e-13));

  // Power utility keeps consumption in the formula.
  const auto up = UtilitySpec::power(1.0, 2.0, 0.5, -1.0);
  const auto pa = build_economy(up, ex.k, ex.M, ex.lambda, 0.1, 1.0);
  auto bumped_k = ex.k;
  for (NodeId v = 0; v < s.node_count(3); ++v) bumped_k.at(3, v) *= 2.0;
  const auto pb = build_economy(up, bumped_k, ex.M, ex.lambda, 0.1, 1.0);
  const double pva = price_claim(up, pa, 3, payoff);
  const double pvb = price_claim(up, pb, 3, payoff);
  // theta = q(1-p)/(1-q) = -1/4, so doubling maturity consumption scales
  // the claim by 2^{-1/4}.
  CHECK(pvb / pva == doctest::Approx(std::pow(2.0, -0.25)).epsilon(1e-13));
}

TEST_CASE("price responses move in the documented directions") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 1.0, 3), 0.5);
  const auto ex = random_exogenous(s, 373);
  const auto u = UtilitySpec::log_separable(1.0, 1.0);
  const auto base = build_economy(u, ex.k, ex.M, ex.lambda, 0.0, 1.0);

  SUBCASE("more money raises the price level one for one") {
    auto scaled_M = ex.M;
    for (int i = 0; i <= 3; ++i)
      for (NodeId v = 0; v < s.node_count(i); ++v) scaled_M.at(i, v) *= 1.2;
    const auto econ = build_economy(u, ex.k, scaled_M, ex.lambda, 0.0, 1.0);
    for (int i = 0; i <= 3; ++i)
      for (NodeId v = 0; v < s.node_count(i); ++v)
        CHECK(econ.C.at(i, v) ==
              doctest::Approx(1.2 * base.C.at(i, v)).epsilon(1e-15));
  }
  SUBCASE("a larger future money supply cheapens nominal claims") {
    auto late_M = ex.M;
    for (NodeId v = 0; v < s.node_count(3); ++v) late_M.at(3, v) *= 1.25;
    const auto econ = build_economy(u, ex.k, late_M, ex.lambda, 0.0, 1.0);
    const std::vector<double> payoff(s.node_count(3), 3.0);
    CHECK(price_claim(u, econ, 3, payoff) ==
          doctest::Approx(price_claim(u, base, 3, payoff) / 1.25)
              .epsilon(1e-14));
  }
  SUBCASE("power utility: more consumption lowers the price level") {
    const auto up = UtilitySpec::power(1.0, 1.0, 0.5, -1.0);
    const auto pa = build_economy(up, ex.k, ex.M, ex.lambda, 0.0, 1.0);
    auto bumped = ex.k;
    for (int i = 0; i <= 3; ++i)
      for (NodeId v = 0; v < s.node_count(i); ++v) bumped.at(i, v) *= 2.0;
    const auto pb = build_economy(up, bumped, ex.M, ex.lambda, 0.0, 1.0);
    for (int i = 0; i <= 3; ++i)
      for (NodeId v = 0; v < s.node_count(i); ++v)
        CHECK(pb.C.at(i, v) ==
              doctest::Approx(std::pow(2.0, -0.25) * pa.C.at(i, v))
                  .epsilon(1e-14));
  }
}

TEST_CASE("the discount rate never enters the real economy") {
  const auto s =
      LatticeSpace::binomial_tree(TimeGrid::uniform(0.0, 0.5, 4), 0.5);
  const auto ex = random_exogenous(s, 379);
  const auto u = UtilitySpec::power(1.5, 0.8, -0.5, 0.3);
  const auto flat = build_economy(u, ex.k, ex.M, ex.lambda, 0.0, 1.0);
  const auto tilted = build_economy(u, ex.k, ex.M, ex.lambda, 0.7, 1.0);

  for (int i = 0; i <= 4; ++i)
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      CHECK(tilted.C.at(i, v) == flat.C.at(i, v));
      CHECK(tilted.l.at(i, v) == flat.l.at(i, v));
      const double expected =
          flat.pi.at(i, v) * std::exp(-0.7 * s.grid()[i]);
      CHECK(tilted.pi.at(i, v) ==
            doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("information-driven economy") {
  InfoEconomyModel m;
  m.grid = TimeGrid({0.0, 1.0, 2.0});
  m.factors = {{XFactor{2, Prior::discrete({0.0, 1.0}, {0.5, 0.5}), 0}, 1.0}};
  m.consumption_map = {1.0, {0.5}};
  m.money_map = {2.0, {1.0}};
  m.liquidity_map = {1.0, {0.5}};
  m.utility = UtilitySpec::log_separable(1.0, 1.0);
  m.gamma = 0.1;
  m.mu = 1.0;

  SUBCASE("validation") {
    auto bad = m;
    bad.factors[0].sigma = 0.0;
    CHECK(contains(thrown_message([&] { info_economy_path(bad, 1, 0); }),
                   "sigma must be finite and > 0"));
    auto dup = m;
    dup.factors.push_back(dup.factors[0]);
    dup.consumption_map.slopes = {0.5, 0.5};
    dup.money_map.slopes = {1.0, 1.0};
    dup.liquidity_map.slopes = {0.5, 0.5};
    CHECK(contains(thrown_message([&] { info_economy_path(dup, 1, 0); }),
                   "share stream id"));
    auto mismatched = m;
    mismatched.money_map.slopes = {1.0, 2.0};
    CHECK(contains(thrown_message([&] { info_economy_path(mismatched, 1, 0); }),
                   "one slope per factor"));
  }

  SUBCASE("paths are reproducible and positive") {
    const auto a = info_economy_path(m, 7, 3);
    const auto b = info_economy_path(m, 7, 3);
    for (std::size_t i = 0; i < a.pi.size(); ++i) {
      CHECK(a.pi[i] == b.pi[i]);
      CHECK(a.C[i] > 0.0);
      CHECK(a.pi[i] > 0.0);
    }
    const auto c = info_economy_path(m, 8, 3);
    CHECK(a.pi[1] != c.pi[1]);
  }

  SUBCASE("estimates interpolate the prior and end at the revealed value") {
    for (std::uint64_t p = 0; p < 40; ++p) {
      const auto state = info_economy_path(m, 11, p);
      const auto raw =
          sample_information(m.grid, m.factors[0].factor, 1.0, 11, p);
      CHECK(state.estimates[0][0] == 0.5);  // prior mean, no signal yet
      CHECK(state.estimates[0][1] >= 0.0);
      CHECK(state.estimates[0][1] <= 1.0);
      CHECK(state.estimates[0][2] ==
            doctest::Approx(raw.x).epsilon(1e-12).scale(1.0));
    }
  }

  SUBCASE("deterministic deflated payoff prices exactly") {
    // H = lambda_j M_j makes pi_j H constant across paths in the log model.
    const auto est = info_claim_price(
        m, 2,
        [](const InfoEconomyPath& s, int j) {
          const auto sj = static_cast<std::size_t>(j);
          return s.lambda[sj] * s.M[sj];
        },
        13, 200);
    const auto root = info_economy_path(m, 13, 0);
    const double expected =
        root.lambda[0] * root.M[0] * std::exp(-0.1 * 2.0);
    CHECK(est.value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(est.se <= 1e-13 * est.value);
  }

  SUBCASE("monte carlo claim matches the closed form") {
    // H = M_j at the reveal date: H_0 = lambda_0 M_0 e^{-gamma t_j} E[1/lambda_j],
    // and lambda_j is revealed as lambda(x), so E[1/lambda_j] runs over the
    // prior atoms.
    const auto est = info_claim_price(
        m, 2,
        [](const InfoEconomyPath& s, int j) {
          return s.M[static_cast<std::size_t>(j)];
        },
        17, 4000);
    const auto root = info_economy_path(m, 17, 0);
    const double analytic = root.lambda[0] * root.M[0] *
                            std::exp(-0.1 * 2.0) *
                            (0.5 / 1.0 + 0.5 / 1.5);
    CHECK(est.se > 0.0);
    CHECK(std::abs(est.value - analytic) < 3.0 * est.se);
  }
}

TEST_SUITE_END();
