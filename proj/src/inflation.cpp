#include "pklab/inflation.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "detail.hpp"

namespace pklab {

using detail::node_str;

namespace {

void check_weights(double A, double B, const char* where) {
  require(std::isfinite(A) && A > 0.0, where,
          "consumption weight A must be finite and > 0");
  require(std::isfinite(B) && B > 0.0, where,
          "money-benefit weight B must be finite and > 0");
}

}  // namespace

UtilitySpec UtilitySpec::log_separable(double A, double B) {
  check_weights(A, B, "UtilitySpec::log_separable");
  UtilitySpec u;
  u.kind = Kind::LogSeparable;
  u.A = A;
  u.B = B;
  u.Ux = [A](double x, double) { return A / x; };
  u.Uy = [B](double, double y) { return B / y; };
  return u;
}

UtilitySpec UtilitySpec::power(double A, double B, double p, double q) {
  const char* where = "UtilitySpec::power";
  check_weights(A, B, where);
  require(std::isfinite(p) && p < 1.0 && p != 0.0, where,
          "exponent p must lie in (-inf, 1) excluding 0");
  require(std::isfinite(q) && q < 1.0 && q != 0.0, where,
          "exponent q must lie in (-inf, 1) excluding 0");
  UtilitySpec u;
  u.kind = Kind::Power;
  u.A = A;
  u.B = B;
  u.p = p;
  u.q = q;
  u.Ux = [A, p](double x, double) { return A * std::pow(x, p - 1.0); };
  u.Uy = [B, q](double, double y) { return B * std::pow(y, q - 1.0); };
  return u;
}

UtilitySpec UtilitySpec::generic(std::function<double(double, double)> Ux,
                                 std::function<double(double, double)> Uy) {
  const char* where = "UtilitySpec::generic";
  require(static_cast<bool>(Ux) && static_cast<bool>(Uy), where,
          "both marginal utilities are required");
  // Spot checks of the standard shape conditions (necessary only): marginals
  // positive, U_x decreasing in consumption, U_y decreasing in the benefit.
  const double grid[] = {0.25, 1.0, 4.0};
  for (double a : grid)
    for (double b : grid) {
      const double vx = Ux(a, b);
      const double vy = Uy(a, b);
      require(std::isfinite(vx) && vx > 0.0, where,
              "U_x must be finite and > 0 (violated at (" +
                  std::to_string(a) + ", " + std::to_string(b) + "))");
      require(std::isfinite(vy) && vy > 0.0, where,
              "U_y must be finite and > 0 (violated at (" +
                  std::to_string(a) + ", " + std::to_string(b) + "))");
    }
  for (double b : grid)
    for (int m = 0; m + 1 < 3; ++m)
      require(Ux(grid[m], b) > Ux(grid[m + 1], b), where,
              "U_x must decrease in consumption (violated near x = " +
                  std::to_string(grid[m]) + ")");
  for (double a : grid)
    for (int m = 0; m + 1 < 3; ++m)
      require(Uy(a, grid[m]) > Uy(a, grid[m + 1]), where,
              "U_y must decrease in the money benefit (violated near y = " +
                  std::to_string(grid[m]) + ")");
  UtilitySpec u;
  u.kind = Kind::Generic;
  u.Ux = std::move(Ux);
  u.Uy = std::move(Uy);
  return u;
}

namespace {

void check_state(double k, double M, double lambda, const char* where,
                 const std::string& at) {
  require(std::isfinite(k) && k > 0.0, where,
          "consumption must be finite and > 0" + at);
  require(std::isfinite(M) && M > 0.0, where,
          "money supply must be finite and > 0" + at);
  require(std::isfinite(lambda) && lambda > 0.0, where,
          "liquidity benefit must be finite and > 0" + at);
}

// Root of U_x(k, e^z) = U_y(k, e^z) over z in [-30, 30] by bisection.
double solve_benefit(const UtilitySpec& u, double k) {
  const char* where = "price_level";
  double lo = -30.0;
  double hi = 30.0;
  auto g = [&](double z) { return u.Ux(k, std::exp(z)) - u.Uy(k, std::exp(z)); };
  double glo = g(lo);
  double ghi = g(hi);
  if (glo == 0.0) return std::exp(lo);
  if (ghi == 0.0) return std::exp(hi);
  require(
      (glo < 0.0) != (ghi < 0.0), where,
      "fundamental relation has no bracketed root for l in [e^-30, e^30] at "
      "k = " +
          std::to_string(k) + " (U_x - U_y: " + std::to_string(glo) +
          " at the lower end, " + std::to_string(ghi) + " at the upper)");
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) return std::exp(mid);
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace

double price_level(const UtilitySpec& u, double k, double M, double lambda) {
  const char* where = "price_level";
  check_state(k, M, lambda, where, "");
  switch (u.kind) {
    case UtilitySpec::Kind::LogSeparable:
      return (u.A / u.B) * lambda * M / k;
    case UtilitySpec::Kind::Power:
      return std::pow(u.A / u.B, 1.0 / (1.0 - u.q)) * lambda * M *
             std::pow(k, -(1.0 - u.p) / (1.0 - u.q));
    case UtilitySpec::Kind::Generic:
      return lambda * M / solve_benefit(u, k);
  }
  fail(where, "unknown utility kind");
}

namespace {

void check_economy_inputs(const AdaptedProcess& k, const AdaptedProcess& M,
                          const AdaptedProcess& lambda, const char* where) {
  require(&k.space() == &M.space() && &k.space() == &lambda.space(), where,
          "consumption, money, and liquidity must share one lattice");
  const int n = k.space().horizon();
  for (const auto* x : {&k, &M, &lambda})
    require(x->first_index() == 0 && x->last_index() == n, where,
            "inputs must be defined on the full grid [0, " +
                std::to_string(n) + "]");
}

}  // namespace

LatticeEconomy build_economy(const UtilitySpec& u, const AdaptedProcess& k,
                             const AdaptedProcess& M,
                             const AdaptedProcess& lambda, double gamma,
                             double mu) {
  const char* where = "build_economy";
  check_economy_inputs(k, M, lambda, where);
  require(std::isfinite(gamma), where, "gamma must be finite");
  require(std::isfinite(mu) && mu > 0.0, where, "mu must be finite and > 0");

  const LatticeSpace& s = k.space();
  const int n = s.horizon();
  LatticeEconomy econ{gamma, mu, k, M, lambda,
                      AdaptedProcess(s, 0, n), AdaptedProcess(s, 0, n),
                      AdaptedProcess(s, 0, n), AdaptedProcess(s, 0, n)};
  for (int i = 0; i <= n; ++i) {
    const double disc = std::exp(-gamma * s.grid()[i]);
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      const double kv = k.at(i, v);
      const double Mv = M.at(i, v);
      const double lv = lambda.at(i, v);
      check_state(kv, Mv, lv, where, " (node " + node_str(i, v) + ")");
      const double C = price_level(u, kv, Mv, lv);
      const double benefit = lv * Mv / C;
      econ.C.at(i, v) = C;
      econ.l.at(i, v) = benefit;
      econ.pi.at(i, v) = disc * u.Ux(kv, benefit) / (mu * C);
      econ.pi_real.at(i, v) = econ.pi.at(i, v) * C;
    }
  }
  return econ;
}

double solve_mu(const UtilitySpec& u, const AdaptedProcess& k,
                const AdaptedProcess& M, const AdaptedProcess& lambda,
                double gamma, double wealth) {
  const char* where = "solve_mu";
  check_economy_inputs(k, M, lambda, where);
  require(std::isfinite(gamma), where, "gamma must be finite");
  require(std::isfinite(wealth) && wealth > 0.0, where,
          "wealth must be finite and > 0");

  const LatticeSpace& s = k.space();
  double total = 0.0;
  for (int i = 0; i <= s.horizon(); ++i) {
    const double disc = std::exp(-gamma * s.grid()[i]);
    double level_sum = 0.0;
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      const double kv = k.at(i, v);
      const double Mv = M.at(i, v);
      const double lv = lambda.at(i, v);
      check_state(kv, Mv, lv, where, " (node " + node_str(i, v) + ")");
      const double C = price_level(u, kv, Mv, lv);
      const double benefit = lv * Mv / C;
      level_sum +=
          s.node_prob(i, v) * u.Ux(kv, benefit) * (kv + benefit);
    }
    total += disc * level_sum;
  }
  return total / wealth;
}

double budget_value(const LatticeEconomy& econ) {
  const LatticeSpace& s = econ.k.space();
  double total = 0.0;
  for (int i = 0; i <= s.horizon(); ++i) {
    double level_sum = 0.0;
    for (NodeId v = 0; v < s.node_count(i); ++v)
      level_sum += s.node_prob(i, v) * econ.pi.at(i, v) *
                   (econ.C.at(i, v) * econ.k.at(i, v) +
                    econ.lambda.at(i, v) * econ.M.at(i, v));
    total += level_sum;
  }
  return total;
}

FocReport foc_residuals(const UtilitySpec& u, const LatticeEconomy& econ) {
  const LatticeSpace& s = econ.k.space();
  FocReport rep;
  for (int i = 0; i <= s.horizon(); ++i) {
    const double grow = std::exp(econ.gamma * s.grid()[i]);
    for (NodeId v = 0; v < s.node_count(i); ++v) {
      const double target =
          econ.mu * grow * econ.pi.at(i, v) * econ.C.at(i, v);
      const double kv = econ.k.at(i, v);
      const double lv = econ.l.at(i, v);
      const double rx = std::abs(u.Ux(kv, lv) - target) / std::abs(target);
      const double ry = std::abs(u.Uy(kv, lv) - target) / std::abs(target);
      if (rx > rep.x.max_deviation) rep.x = {rx, i, v};
      if (ry > rep.y.max_deviation) rep.y = {ry, i, v};
    }
  }
  return rep;
}

AdaptedProcess velocity(const LatticeEconomy& econ) {
  const LatticeSpace& s = econ.k.space();
  AdaptedProcess v(s, 0, s.horizon());
  for (int i = 0; i <= s.horizon(); ++i)
    for (NodeId w = 0; w < s.node_count(i); ++w)
      v.at(i, w) = econ.k.at(i, w) * econ.C.at(i, w) / econ.M.at(i, w);
  return v;
}

double price_claim(const UtilitySpec& u, const LatticeEconomy& econ, int j,
                   std::span<const double> payoff) {
  const char* where = "price_claim";
  const LatticeSpace& s = econ.k.space();
  require(j >= 0 && j <= s.horizon(), where,
          "payoff index " + std::to_string(j) + " out of range [0, " +
              std::to_string(s.horizon()) + "]");
  require(payoff.size() == s.node_count(j), where,
          "payoff needs one value per node at index " + std::to_string(j));

  const double elapsed = s.grid()[j] - s.grid()[0];
  switch (u.kind) {
    case UtilitySpec::Kind::LogSeparable: {
      double mean = 0.0;
      for (NodeId v = 0; v < s.node_count(j); ++v)
        mean += s.node_prob(j, v) * payoff[v] /
                (econ.lambda.at(j, v) * econ.M.at(j, v));
      return econ.lambda.at(0, 0) * econ.M.at(0, 0) *
             std::exp(-econ.gamma * elapsed) * mean;
    }
    case UtilitySpec::Kind::Power: {
      const double theta = u.q * (1.0 - u.p) / (1.0 - u.q);
      double mean = 0.0;
      for (NodeId v = 0; v < s.node_count(j); ++v)
        mean += s.node_prob(j, v) * payoff[v] *
                std::pow(econ.k.at(j, v), theta) /
                (econ.lambda.at(j, v) * econ.M.at(j, v));
      return econ.lambda.at(0, 0) * econ.M.at(0, 0) /
             std::pow(econ.k.at(0, 0), theta) *
             std::exp(-econ.gamma * elapsed) * mean;
    }
    case UtilitySpec::Kind::Generic: {
      double mean = 0.0;
      for (NodeId v = 0; v < s.node_count(j); ++v)
        mean += s.node_prob(j, v) * econ.pi.at(j, v) * payoff[v];
      return mean / econ.pi.at(0, 0);
    }
  }
  fail(where, "unknown utility kind");
}

// ---- Information-driven economies -----------------------------------------

double AffineMap::apply(std::span<const double> estimates) const {
  double out = base;
  for (std::size_t f = 0; f < slopes.size(); ++f)
    out += slopes[f] * estimates[f];
  return out;
}

namespace {

void check_model(const InfoEconomyModel& m, const char* where) {
  require(m.grid[0] == 0.0, where, "grid must start at time 0");
  require(!m.factors.empty(), where, "need at least one information factor");
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    require(std::isfinite(m.factors[f].sigma) && m.factors[f].sigma > 0.0,
            where,
            "factor " + std::to_string(f) + ": sigma must be finite and > 0");
    for (std::size_t g = f + 1; g < m.factors.size(); ++g)
      require(m.factors[f].factor.stream != m.factors[g].factor.stream, where,
              "factors " + std::to_string(f) + " and " + std::to_string(g) +
                  " share stream id " +
                  std::to_string(m.factors[f].factor.stream));
  }
  for (const auto* map :
       {&m.consumption_map, &m.money_map, &m.liquidity_map})
    require(map->slopes.size() == m.factors.size(), where,
            "affine maps need one slope per factor");
  require(static_cast<bool>(m.utility.Ux) && static_cast<bool>(m.utility.Uy),
          where, "utility spec is missing its marginals");
  require(std::isfinite(m.gamma), where, "gamma must be finite");
  require(std::isfinite(m.mu) && m.mu > 0.0, where,
          "mu must be finite and > 0");
}

}  // namespace

InfoEconomyPath info_economy_path(const InfoEconomyModel& m,
                                  std::uint64_t seed, std::uint64_t path) {
  const char* where = "info_economy_path";
  check_model(m, where);
  const int n = m.grid.last_index();

  InfoEconomyPath out;
  out.estimates.resize(m.factors.size());
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    const auto& spec = m.factors[f];
    const auto sample =
        sample_information(m.grid, spec.factor, spec.sigma, seed, path);
    auto& est = out.estimates[f];
    est.resize(static_cast<std::size_t>(n) + 1);
    const int reveal = spec.factor.reveal_index;
    const double revealed = revealed_value(
        m.grid, spec.factor, spec.sigma,
        sample.xi[static_cast<std::size_t>(reveal)]);
    for (int i = 0; i <= n; ++i)
      est[static_cast<std::size_t>(i)] =
          i < reveal ? filter_mean(m.grid, spec.factor, spec.sigma, i,
                                   sample.xi[static_cast<std::size_t>(i)])
                     : revealed;
  }

  const auto sz = static_cast<std::size_t>(n) + 1;
  out.k.resize(sz);
  out.M.resize(sz);
  out.lambda.resize(sz);
  out.C.resize(sz);
  out.l.resize(sz);
  out.pi.resize(sz);
  std::vector<double> est_at(m.factors.size());
  for (int i = 0; i <= n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    for (std::size_t f = 0; f < m.factors.size(); ++f)
      est_at[f] = out.estimates[f][si];
    const double kv = m.consumption_map.apply(est_at);
    const double Mv = m.money_map.apply(est_at);
    const double lv = m.liquidity_map.apply(est_at);
    const std::string at = " (path " + std::to_string(path) + ", index " +
                           std::to_string(i) + ")";
    require(std::isfinite(kv) && kv > 0.0, where,
            "consumption map produced " + std::to_string(kv) + at);
    require(std::isfinite(Mv) && Mv > 0.0, where,
            "money map produced " + std::to_string(Mv) + at);
    require(std::isfinite(lv) && lv > 0.0, where,
            "liquidity map produced " + std::to_string(lv) + at);
    const double C = price_level(m.utility, kv, Mv, lv);
    const double benefit = lv * Mv / C;
    out.k[si] = kv;
    out.M[si] = Mv;
    out.lambda[si] = lv;
    out.C[si] = C;
    out.l[si] = benefit;
    out.pi[si] = std::exp(-m.gamma * m.grid[i]) *
                 m.utility.Ux(kv, benefit) / (m.mu * C);
  }
  return out;
}

ClaimEstimate info_claim_price(
    const InfoEconomyModel& m, int j,
    const std::function<double(const InfoEconomyPath&, int)>& payoff,
    std::uint64_t seed, int paths) {
  const char* where = "info_claim_price";
  check_model(m, where);
  require(j >= 0 && j <= m.grid.last_index(), where,
          "payoff index " + std::to_string(j) + " out of range [0, " +
              std::to_string(m.grid.last_index()) + "]");
  require(paths >= 2, where, "need at least 2 paths");
  require(static_cast<bool>(payoff), where, "missing payoff callable");

  const auto sj = static_cast<std::size_t>(j);
  std::vector<double> deflated(static_cast<std::size_t>(paths));
  double pi0 = 0.0;
  for (int p = 0; p < paths; ++p) {
    const auto state =
        info_economy_path(m, seed, static_cast<std::uint64_t>(p));
    if (p == 0) pi0 = state.pi[0];
    const double u = state.pi[sj] * payoff(state, j);
    require(std::isfinite(u), where,
            "deflated payoff is not finite on path " + std::to_string(p));
    deflated[static_cast<std::size_t>(p)] = u;
  }
  const double n = paths;
  double sum = 0.0;
  for (double u : deflated) sum += u;
  const double mean = sum / n;
  // Two-pass variance: the one-pass form cannot resolve the tiny spread of
  // an (almost) deterministic deflated payoff.
  double var = 0.0;
  for (double u : deflated) var += (u - mean) * (u - mean);
  var /= n - 1.0;
  ClaimEstimate est;
  est.value = mean / pi0;
  est.se = std::sqrt(var / n) / pi0;
  est.paths = paths;
  return est;
}

}  // namespace pklab
