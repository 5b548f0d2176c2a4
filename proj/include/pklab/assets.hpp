#pragma once

// Dividend-paying assets priced by a kernel: deflated-gains martingale
// certification, the growth/income decomposition, transversality residuals,
// and the one-period positive-return construction.

#include <vector>

#include "pklab/lattice.hpp"
#include "pklab/tolerances.hpp"

namespace pklab {

// Price process on [f, N] and dividends on [f+1, N]; the dividend at index
// i is paid at time t_i to the holder over (t_{i-1}, t_i].
struct Asset {
  AdaptedProcess price;
  AdaptedProcess dividend;
};

// Deflated gains M_i = pi_i S_i + sum_{n<=i} pi_n D_n (tree lattices; the
// running dividend sum is a path object).
AdaptedProcess gains_process(const Asset& a, const AdaptedProcess& pi);

// Worst one-step deviation of the deflated-gains martingale property.
CheckResult pricing_defect(const Asset& a, const AdaptedProcess& pi);

// Price of the dividend stream: S_i = E_i[ sum_{n>i} pi_n D_n ] / pi_i,
// plus an optional terminal value per node at the horizon (default zero,
// which builds in a vanishing transversality term).
AdaptedProcess price_income_asset(const AdaptedProcess& dividend,
                                  const AdaptedProcess& pi,
                                  const std::vector<double>& terminal_value = {});

// Decomposition S_i = m_i / pi_i + income value, with m_i = E_i[pi_N S_N]
// the martingale (growth) component.  The asset's deflated gains must pass
// the martingale certification first.
struct GrowthIncomeSplit {
  AdaptedProcess m;             // martingale component of pi * S
  AdaptedProcess growth_value;  // m / pi
  AdaptedProcess income_value;  // S - m / pi
};

GrowthIncomeSplit growth_income_split(const Asset& a, const AdaptedProcess& pi,
                                      double cert_tol = tol::gains_cert);

// E[pi_N S_N]: zero exactly when the dividend stream accounts for the whole
// price (the finite-horizon transversality residual).
double transversality_defect(const Asset& a, const AdaptedProcess& pi);

// The asset of constant value one induced by a strictly increasing account:
// S = 1, D_i = (B_i - B_{i-1}) / B_{i-1}.
Asset constant_value_asset(const AdaptedProcess& account);

// One-period binomial market: risky payoffs (U, D) against an account
// growing B0 -> B1 determine the pricing probability p*; a candidate asset
// with initial price Sbar0 and down payoff Dbar is completed to a
// positive-return asset by solving for its up payoff.
struct PositiveReturnSolution {
  double pstar;
  double ubar;
};

PositiveReturnSolution binomial_positive_return(double S0, double U, double D,
                                                double B0, double B1,
                                                double Sbar0, double Dbar);

// Income price as a ratio of two kernel-weighted sums, the denominator
// re-expressing pi_i through the money-market flow r:
//   S_i = E_i[ sum_{n>i} pi_n D_n + pi_N T ] / E_i[ sum_{n>i} pi_n r_n + pi_N ].
// r is the previsible money-market rate on [f+1, N].
AdaptedProcess symmetric_income_price(const AdaptedProcess& dividend,
                                      const AdaptedProcess& pi,
                                      const AdaptedProcess& r,
                                      const std::vector<double>& terminal_value = {});

}  // namespace pklab
