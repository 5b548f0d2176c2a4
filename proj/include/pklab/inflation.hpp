#pragma once

// Utility-derived price-level models. A representative agent draws utility
// from consumption k and from the real benefit l = lambda * M / C of the
// money supply, discounted at rate gamma, subject to the budget
// W = E[ sum_n pi_n (C_n k_n + lambda_n M_n) ]. The first-order conditions
// force U_x(k, l) = U_y(k, l), which determines the price level C from
// (k, M, lambda), and give the nominal kernel pi = e^{-gamma t} U_x / (mu C)
// with mu the budget multiplier. The real kernel is pi * C.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pklab/infoflow.hpp"
#include "pklab/lattice.hpp"

namespace pklab {

// Marginal utilities of a bivariate utility U(x, y): x is consumption,
// y the real money benefit. The named forms carry closed-form price levels;
// Generic solves the first-order condition numerically and is also the
// cross-check route for the named forms.
struct UtilitySpec {
  enum class Kind { LogSeparable, Power, Generic };

  Kind kind = Kind::LogSeparable;
  double A = 1.0;  // consumption weight
  double B = 1.0;  // money-benefit weight
  double p = 0.0;  // consumption exponent (power only)
  double q = 0.0;  // money-benefit exponent (power only)
  std::function<double(double, double)> Ux;
  std::function<double(double, double)> Uy;

  // U(x, y) = A ln x + B ln y.
  static UtilitySpec log_separable(double A, double B);
  // U(x, y) = (A/p) x^p + (B/q) y^q with p, q in (-inf, 1) \ {0}.
  static UtilitySpec power(double A, double B, double p, double q);
  // Arbitrary marginals; spot-checked for positivity and for decreasing
  // U_x(., y), U_y(x, .) on a coarse sample grid (necessary conditions only).
  static UtilitySpec generic(std::function<double(double, double)> Ux,
                             std::function<double(double, double)> Uy);
};

// Price level C solving U_x(k, lambda M / C) = U_y(k, lambda M / C).
// Closed form for the named utilities; for Generic a bisection on
// log l over [-30, 30] to ~1e-12 relative accuracy.
double price_level(const UtilitySpec& u, double k, double M, double lambda);

// Exogenous (k, M, lambda) on a lattice turned into the derived quantities.
struct LatticeEconomy {
  double gamma = 0.0;
  double mu = 1.0;
  AdaptedProcess k;        // consumption
  AdaptedProcess M;        // money supply
  AdaptedProcess lambda;   // liquidity benefit rate
  AdaptedProcess C;        // price level
  AdaptedProcess l;        // real money benefit, lambda M / C
  AdaptedProcess pi;       // nominal pricing kernel
  AdaptedProcess pi_real;  // pi * C
};

LatticeEconomy build_economy(const UtilitySpec& u, const AdaptedProcess& k,
                             const AdaptedProcess& M,
                             const AdaptedProcess& lambda, double gamma,
                             double mu);

// Budget multiplier implied by initial wealth:
// mu = E[ sum_n e^{-gamma t_n} U_x(k_n, l_n) (k_n + l_n) ] / wealth.
double solve_mu(const UtilitySpec& u, const AdaptedProcess& k,
                const AdaptedProcess& M, const AdaptedProcess& lambda,
                double gamma, double wealth);

// E[ sum_n pi_n (C_n k_n + lambda_n M_n) ]; equals the wealth passed to
// solve_mu when the economy uses the solved multiplier.
double budget_value(const LatticeEconomy& econ);

// Worst relative first-order-condition residuals over all nodes:
// x: |U_x - mu e^{gamma t} pi C| / target, y: same for U_y.
struct FocReport {
  CheckResult x;
  CheckResult y;
};

FocReport foc_residuals(const UtilitySpec& u, const LatticeEconomy& econ);

// Velocity of money k C / M.
AdaptedProcess velocity(const LatticeEconomy& econ);

// Value at the root of a claim paying `payoff` (one value per node) at
// index j. Log and power utilities use their closed forms
//   log:    lambda_0 M_0 e^{-gamma (t_j - t_0)} E[ H / (lambda_j M_j) ]
//   power:  as log with H k_j^theta / k_0^theta, theta = q (1-p) / (1-q)
// and Generic prices through the kernel, E[pi_j H] / pi_0.
double price_claim(const UtilitySpec& u, const LatticeEconomy& econ, int j,
                   std::span<const double> payoff);

// ---- Information-driven economies ----------------------------------------
// The exogenous processes are affine in the filtered estimates of a set of
// information factors (and in the revealed values once a factor's reveal
// date has passed).

struct InfoFactorSpec {
  XFactor factor;
  double sigma = 1.0;  // information flow rate, > 0
};

struct AffineMap {
  double base = 0.0;
  std::vector<double> slopes;  // one per factor

  double apply(std::span<const double> estimates) const;
};

struct InfoEconomyModel {
  TimeGrid grid{std::vector<double>{0.0, 1.0}};
  std::vector<InfoFactorSpec> factors;
  AffineMap consumption_map;  // k
  AffineMap money_map;        // M
  AffineMap liquidity_map;    // lambda
  UtilitySpec utility;
  double gamma = 0.0;
  double mu = 1.0;
};

struct InfoEconomyPath {
  // estimates[f][i]: filtered (or revealed) value of factor f at index i.
  std::vector<std::vector<double>> estimates;
  std::vector<double> k;
  std::vector<double> M;
  std::vector<double> lambda;
  std::vector<double> C;
  std::vector<double> l;
  std::vector<double> pi;
};

// Simulates one path of the economy: information samples per factor,
// filtered estimates before each reveal date, observation-inverted values
// after, and the derived (C, l, pi) per index.
InfoEconomyPath info_economy_path(const InfoEconomyModel& m,
                                  std::uint64_t seed, std::uint64_t path);

struct ClaimEstimate {
  double value = 0.0;
  double se = 0.0;
  int paths = 0;
};

// Monte Carlo value E[pi_j H_j] / pi_0 of a claim paying
// payoff(path_state, j) at index j, with the standard error of the mean.
ClaimEstimate info_claim_price(
    const InfoEconomyModel& m, int j,
    const std::function<double(const InfoEconomyPath&, int)>& payoff,
    std::uint64_t seed, int paths);

}  // namespace pklab
