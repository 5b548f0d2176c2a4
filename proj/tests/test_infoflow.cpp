#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pklab/infoflow.hpp"
#include "pklab/numerics.hpp"
#include "pklab/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pklab;
using fixtures::contains;
using fixtures::thrown_message;

namespace {

XFactor two_atom_factor(int reveal, double x1, double x2, double w1,
                        double w2) {
  return XFactor{reveal, Prior::discrete({x1, x2}, {w1, w2}), 0};
}

}  // namespace

TEST_SUITE_BEGIN("infoflow");

TEST_CASE("gauss-legendre integrates polynomials of degree 2n-1") {
  const auto q = gauss_legendre(5);
  REQUIRE(q.x.size() == 5);
  for (int deg = 0; deg <= 9; ++deg) {
    double acc = 0.0;
    for (std::size_t m = 0; m < q.x.size(); ++m)
      acc += q.w[m] * std::pow(q.x[m], deg);
    const double exact = (deg % 2 == 1) ? 0.0 : 2.0 / (deg + 1);
    CHECK(acc == doctest::Approx(exact).epsilon(1e-14).scale(1.0));
  }
  CHECK(q.x[2] == 0.0);
  for (std::size_t m = 0; m + 1 < q.x.size(); ++m) {
    CHECK(q.x[m] < q.x[m + 1]);
    CHECK(q.x[m] == -q.x[q.x.size() - 1 - m]);
  }
}

TEST_CASE("gauss-legendre on a mapped interval") {
  const auto q = gauss_legendre(256, 0.0, M_PI / 2.0);
  double total_w = 0.0;
  double integral = 0.0;
  for (std::size_t m = 0; m < q.x.size(); ++m) {
    CHECK(q.w[m] > 0.0);
    total_w += q.w[m];
    integral += q.w[m] * std::cos(q.x[m]);
  }
  CHECK(total_w == doctest::Approx(M_PI / 2.0).epsilon(1e-14));
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(contains(thrown_message([] { gauss_legendre(0); }), "at least 1"));
  CHECK(contains(thrown_message([] { gauss_legendre(8, 1.0, 1.0); }),
                 "a < b"));
}

TEST_CASE("splitmix64 matches the reference sequence") {
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xe220a8397b1dcdafull);
  CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ull);
  CHECK(splitmix64(s) == 0x06c45d188009454full);
  std::uint64_t s2 = 0x123456789abcdefull;
  CHECK(splitmix64(s2) == 0x157a3807a48faa9dull);
  CHECK(splitmix64(s2) == 0xd573529b34a1d093ull);
}

TEST_CASE("counter streams are reproducible and separated") {
  auto a = stream_rng(42, 0, 7);
  auto b = stream_rng(42, 0, 7);
  for (int n = 0; n < 8; ++n) CHECK(a() == b());

  CHECK(stream_rng(42, 0, 7)() != stream_rng(42, 0, 8)());
  CHECK(stream_rng(42, 0, 7)() != stream_rng(42, 1, 7)());
  CHECK(stream_rng(42, 0, 7)() != stream_rng(43, 0, 7)());
}

TEST_CASE("prior construction and validation") {
  SUBCASE("atoms are sorted and duplicates merged") {
    const auto p = Prior::discrete({2.0, -1.0, 2.0}, {0.25, 0.5, 0.25});
    REQUIRE(p.points().size() == 2);
    CHECK(p.points()[0] == -1.0);
    CHECK(p.points()[1] == 2.0);
    CHECK(p.masses()[1] == 0.5);
    CHECK(p.mean() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.support_lo() == -1.0);
    CHECK(p.support_hi() == 2.0);
  }
  SUBCASE("weight errors") {
    CHECK(contains(
        thrown_message([] { Prior::discrete({1.0, 2.0}, {0.5, -0.5}); }),
        "finite and >= 0"));
    CHECK(contains(
        thrown_message([] { Prior::discrete({1.0, 2.0}, {0.5, 0.4}); }),
        "sum to one"));
    CHECK(contains(thrown_message([] { Prior::discrete({}, {}); }),
                   "at least one atom"));
  }
  SUBCASE("density must integrate to one") {
    const auto ok = Prior::density([](double) { return 0.5; }, 0.0, 2.0);
    CHECK(ok.mean() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK_FALSE(ok.is_discrete());
    CHECK(contains(
        thrown_message(
            [] { Prior::density([](double) { return 0.7; }, 0.0, 2.0); }),
        "integrate to one"));
    CHECK(contains(
        thrown_message(
            [] { Prior::density([](double x) { return x; }, -1.0, 1.0); }),
        ">= 0"));
  }
}

TEST_CASE("prior sampling matches the distribution") {
  const int n = 20000;
  SUBCASE("discrete frequencies") {
    const auto p = Prior::discrete({-1.0, 3.0}, {0.3, 0.7});
    auto rng = stream_rng(5, 0, 0);
    int hits = 0;
    for (int m = 0; m < n; ++m)
      if (p.sample(rng) == 3.0) ++hits;
    const double freq = static_cast<double>(hits) / n;
    const double se = std::sqrt(0.3 * 0.7 / n);
    CHECK(std::abs(freq - 0.7) < 3.0 * se);
  }
  SUBCASE("continuous mean and support") {
    const auto p = Prior::density([](double) { return 0.5; }, 1.0, 3.0);
    auto rng = stream_rng(6, 0, 0);
    std::vector<double> draws(n);
    for (auto& d : draws) {
      d = p.sample(rng);
      CHECK(d >= 1.0);
      CHECK(d <= 3.0);
    }
    const auto ms = oracle::mean_se(draws);
    CHECK(std::abs(ms.mean - 2.0) < 3.0 * ms.se);
  }
}

TEST_CASE("bridge is pinned at both ends") {
  const TimeGrid grid({0.0, 0.7, 1.3, 2.0});
  auto rng = stream_rng(11, 0, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto beta = sample_bridge(grid, 3, rng);
    REQUIRE(beta.size() == 4);
    CHECK(beta[0] == 0.0);
    CHECK(beta[3] == 0.0);
  }
  CHECK(contains(thrown_message([&] {
                   auto r = stream_rng(1, 0, 0);
                   sample_bridge(grid, 0, r);
                 }),
                 "reveal index"));
  const TimeGrid late({0.5, 1.0});
  CHECK(contains(thrown_message([&] {
                   auto r = stream_rng(1, 0, 0);
                   sample_bridge(late, 1, r);
                 }),
                 "start at time 0"));
}

TEST_CASE("bridge covariances match t_i (T - t_j) / T") {
  const int paths = 100000;
  SUBCASE("variance at the midpoint") {
    const TimeGrid grid({0.0, 1.0, 2.0});
    std::vector<double> b1(paths);
    for (int p = 0; p < paths; ++p) {
      auto rng = stream_rng(17, 0, static_cast<std::uint64_t>(p));
      b1[static_cast<std::size_t>(p)] = sample_bridge(grid, 2, rng)[1];
    }
    const auto var = oracle::cov_se(b1, b1);
    CHECK(std::abs(var.mean - 0.5) < 3.0 * var.se);
    const auto mean = oracle::mean_se(b1);
    CHECK(std::abs(mean.mean) < 3.0 * mean.se);
  }
  SUBCASE("covariance across two interior dates") {
    const TimeGrid grid({0.0, 1.0, 2.0, 3.0});
    std::vector<double> b1(paths);
    std::vector<double> b2(paths);
    for (int p = 0; p < paths; ++p) {
      auto rng = stream_rng(19, 0, static_cast<std::uint64_t>(p));
      const auto beta = sample_bridge(grid, 3, rng);
      b1[static_cast<std::size_t>(p)] = beta[1];
      b2[static_cast<std::size_t>(p)] = beta[2];
    }
    const auto cov = oracle::cov_se(b1, b2);
    CHECK(std::abs(cov.mean - 1.0 / 3.0) < 3.0 * cov.se);
  }
}

TEST_CASE("information samples expose the factor only through the signal") {
  const TimeGrid grid({0.0, 0.5, 1.0, 1.5, 2.0});
  const auto factor = two_atom_factor(4, 0.0, 1.0, 0.4, 0.6);

  SUBCASE("reveal-date observation is exactly sigma T x") {
    for (std::uint64_t p = 0; p < 200; ++p) {
      const auto s = sample_information(grid, factor, 1.25, 23, p);
      REQUIRE(s.xi.size() == 5);
      CHECK(s.xi[4] == 1.25 * grid[4] * s.x);
      CHECK(revealed_value(grid, factor, 1.25, s.xi[4]) ==
            doctest::Approx(s.x).epsilon(1e-15).scale(1.0));
    }
  }
  SUBCASE("sigma = 0 leaves pure noise") {
    const auto s = sample_information(grid, factor, 0.0, 23, 9);
    CHECK(s.xi[0] == 0.0);
    CHECK(s.xi[4] == 0.0);
  }
  SUBCASE("same path is bitwise reproducible, other paths differ") {
    const auto a = sample_information(grid, factor, 1.0, 23, 57);
    const auto b = sample_information(grid, factor, 1.0, 23, 57);
    CHECK(a.x == b.x);
    for (std::size_t i = 0; i < a.xi.size(); ++i) CHECK(a.xi[i] == b.xi[i]);
    const auto c = sample_information(grid, factor, 1.0, 23, 58);
    CHECK(a.xi[1] != c.xi[1]);
  }
  SUBCASE("negative sigma is rejected") {
    CHECK(contains(
        thrown_message([&] { sample_information(grid, factor, -1.0, 1, 0); }),
        "sigma"));
  }
}

TEST_CASE("two-atom filter matches the closed form") {
  const TimeGrid grid({0.0, 0.25, 0.5, 0.75, 1.0});
  const double x1 = -0.5;
  const double x2 = 2.0;
  const double w1 = 0.55;
  const double w2 = 0.45;
  const auto factor = two_atom_factor(4, x1, x2, w1, w2);
  const double sigma = 1.3;
  for (int i = 0; i <= 3; ++i)
    for (double xi = -2.0; xi <= 2.0; xi += 0.5) {
      const double expected = oracle::two_atom_filter(
          x1, x2, w1, w2, x1, x2, xi, sigma, grid[i], grid[4]);
      CHECK(filter_mean(grid, factor, sigma, i, xi) ==
            doctest::Approx(expected).epsilon(1e-12));
      const double p2 = oracle::two_atom_filter(x1, x2, w1, w2, 0.0, 1.0, xi,
                                                sigma, grid[i], grid[4]);
      const double got = filter_expect(grid, factor, sigma, i, xi,
                                       [&](double v) { return v == x2; });
      CHECK(got == doctest::Approx(p2).epsilon(1e-12));
    }
}

TEST_CASE("continuous filter matches Simpson integration") {
  const TimeGrid grid({0.0, 0.5, 1.0});
  const auto pdf = [](double) { return 1.0; };
  const XFactor factor{2, Prior::density(pdf, 0.0, 1.0), 0};
  const double sigma = 0.8;
  for (double xi : {-1.0, -0.3, 0.0, 0.4, 1.2}) {
    const auto identity = [](double v) { return v; };
    const double expected =
        oracle::simpson_filter(identity, pdf, 0.0, 1.0, xi, sigma, grid[1],
                               grid[2]);
    CHECK(filter_mean(grid, factor, sigma, 1, xi) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("filter normalization and degenerate signals are exact") {
  const TimeGrid grid({0.0, 1.0, 2.0, 3.0});
  const auto factor = two_atom_factor(3, -1.0, 2.0, 0.35, 0.65);

  SUBCASE("unit integrand gives exactly one") {
    for (double xi : {-40.0, -1.0, 0.0, 2.5, 40.0})
      CHECK(filter_expect(grid, factor, 1.7, 2, xi,
                          [](double) { return 1.0; }) == 1.0);
  }
  SUBCASE("sigma = 0 reproduces the prior bit for bit") {
    for (double xi : {-3.0, 0.0, 5.0})
      CHECK(filter_mean(grid, factor, 0.0, 1, xi) == factor.prior.mean());
  }
  SUBCASE("index zero carries no signal yet") {
    CHECK(filter_mean(grid, factor, 1.7, 0, 0.0) ==
          doctest::Approx(factor.prior.mean()).epsilon(1e-15));
  }
  SUBCASE("estimates stay inside the prior support") {
    for (double xi : {-80.0, -5.0, 5.0, 80.0}) {
      const double est = filter_mean(grid, factor, 2.0, 2, xi);
      CHECK(est >= factor.prior.support_lo());
      CHECK(est <= factor.prior.support_hi());
    }
  }
  SUBCASE("extreme signal-to-noise stays finite") {
    for (double xi : {-1e6, 1e6}) {
      const double est = filter_mean(grid, factor, 1e4, 1, xi);
      CHECK(std::isfinite(est));
      CHECK(est >= factor.prior.support_lo());
      CHECK(est <= factor.prior.support_hi());
    }
  }
  SUBCASE("index must precede the reveal date") {
    CHECK(contains(
        thrown_message([&] { filter_mean(grid, factor, 1.0, 3, 0.0); }),
        "must lie in [0, 3)"));
  }
}

TEST_CASE("filtered estimates form a martingale under simulation") {
  const TimeGrid grid({0.0, 1.0, 2.0, 3.0});
  const auto factor = two_atom_factor(3, -1.0, 2.0, 0.6, 0.4);
  const double sigma = 0.7;
  const int paths = 20000;

  std::vector<double> drift0(paths);  // est_1 - prior mean
  std::vector<double> drift1(paths);  // est_2 - est_1
  std::vector<double> err_last(paths);
  const double prior_mean = factor.prior.mean();
  for (int p = 0; p < paths; ++p) {
    const auto s =
        sample_information(grid, factor, sigma, 31, static_cast<std::uint64_t>(p));
    const double e1 = filter_mean(grid, factor, sigma, 1, s.xi[1]);
    const double e2 = filter_mean(grid, factor, sigma, 2, s.xi[2]);
    drift0[static_cast<std::size_t>(p)] = e1 - prior_mean;
    drift1[static_cast<std::size_t>(p)] = e2 - e1;
    err_last[static_cast<std::size_t>(p)] = e2 - s.x;
  }
  const auto d0 = oracle::mean_se(drift0);
  const auto d1 = oracle::mean_se(drift1);
  const auto unbiased = oracle::mean_se(err_last);
  CHECK(std::abs(d0.mean) < 3.0 * d0.se);
  CHECK(std::abs(d1.mean) < 3.0 * d1.se);
  CHECK(std::abs(unbiased.mean) < 3.0 * unbiased.se);
}

TEST_CASE("sharper signals track the factor more closely") {
  const TimeGrid grid({0.0, 1.0, 2.0, 3.0});
  const auto factor = two_atom_factor(3, -1.0, 2.0, 0.5, 0.5);
  const int paths = 20000;
  std::vector<double> mse;
  for (double sigma : {0.2, 0.5, 1.0}) {
    double acc = 0.0;
    for (int p = 0; p < paths; ++p) {
      const auto s = sample_information(grid, factor, sigma, 37,
                                        static_cast<std::uint64_t>(p));
      const double est = filter_mean(grid, factor, sigma, 2, s.xi[2]);
      acc += (est - s.x) * (est - s.x);
    }
    mse.push_back(acc / paths);
  }
  CHECK(mse[1] < mse[0]);
  CHECK(mse[2] < mse[1]);
}

TEST_CASE("latest observation screens off the older ones") {
  const TimeGrid grid({0.0, 1.0, 2.0, 3.0, 4.0});
  const auto factor = two_atom_factor(4, -1.0, 1.0, 0.5, 0.5);
  const auto check =
      markov_reduction_check(grid, factor, 1.0, 2, 40000, 41);
  CHECK(check.max_abs_t < 4.0);
  CHECK(check.evaluated_bins >= 48);

  CHECK(contains(thrown_message([&] {
                   markov_reduction_check(grid, factor, 1.0, 2, 32, 41);
                 }),
                 "at least one path per joint bin"));
  CHECK(contains(thrown_message([&] {
                   markov_reduction_check(grid, factor, 1.0, 2, 100, 41, 8,
                                          1000);
                 }),
                 "no joint bin reached"));
}

TEST_SUITE_END();
