#pragma once

// Partial information about a macroeconomic factor X revealed at a fixed
// future date: the observable is xi_i = sigma * t_i * X + beta_i, where beta
// is Brownian-bridge noise vanishing at both ends. Conditional expectations
// given xi follow from Bayes' rule and collapse to the prior when sigma = 0
// and to the revealed value at the reveal date.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pklab/lattice.hpp"
#include "pklab/rng.hpp"

namespace pklab {

// A distribution for the factor: either finitely many atoms or a density on
// a bounded interval, discretized by Gauss-Legendre quadrature. Integration,
// filtering, and sampling all run off the same point/mass arrays.
class Prior {
 public:
  static Prior discrete(std::vector<double> values,
                        std::vector<double> weights);
  static Prior density(std::function<double(double)> pdf, double lo, double hi,
                       int quadrature_points = 256);

  bool is_discrete() const { return discrete_; }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  std::span<const double> points() const { return x_; }
  std::span<const double> masses() const { return w_; }

  // sum f(x) dP / total mass (total mass is 1 up to the validation tolerance).
  double expect(const std::function<double(double)>& f) const;
  double mean() const;

  double sample(CounterRng& rng) const;

 private:
  Prior() = default;
  bool discrete_ = true;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> x_;      // atoms or quadrature nodes, ascending
  std::vector<double> w_;      // point masses (atom weights or w_q * pdf)
  std::vector<double> cdf_x_;  // sampling breakpoints
  std::vector<double> cdf_p_;  // cumulative mass at the breakpoints
};

struct XFactor {
  int reveal_index = 1;      // grid index at which X becomes known (>= 1)
  Prior prior;
  std::uint64_t stream = 0;  // noise stream id, distinct per factor
};

// Brownian-bridge sample over [t_0, t_reveal] on a grid starting at t_0 = 0;
// entries 0 and reveal_index are exactly zero. Consumes one Gaussian draw per
// grid step.
std::vector<double> sample_bridge(const TimeGrid& grid, int reveal_index,
                                  CounterRng& rng);

struct InformationSample {
  double x = 0.0;
  std::vector<double> xi;  // indices 0..reveal_index
};

// Draws X from the prior, then the bridge, from the stream keyed by
// (seed, factor.stream, path). xi at the reveal index is exactly
// sigma * t_reveal * X. Requires sigma >= 0.
InformationSample sample_information(const TimeGrid& grid,
                                     const XFactor& factor, double sigma,
                                     std::uint64_t seed, std::uint64_t path);

// E[f(X) | xi_index = xi] for 0 <= index < reveal_index. Exact Bayes over the
// prior's point masses, stabilized so large exponents cannot overflow. When
// f is identically one the result is exactly 1.0; when sigma = 0 it matches
// Prior::expect(f) bit for bit.
double filter_expect(const TimeGrid& grid, const XFactor& factor, double sigma,
                     int index, double xi,
                     const std::function<double(double)>& f);

// filter_expect with f(x) = x.
double filter_mean(const TimeGrid& grid, const XFactor& factor, double sigma,
                   int index, double xi);

// Inverts xi = sigma * t_reveal * X at the reveal date (sigma > 0).
double revealed_value(const TimeGrid& grid, const XFactor& factor,
                      double sigma, double xi_at_reveal);

// Monte Carlo check that the latest observation alone carries all usable
// history: the one-step prediction E[xi_{index+1} | xi_index] is computed
// through the filter, and the prediction residuals are binned on the joint
// quantiles of (xi_{index-1}, xi_index). Under the model the residual mean
// vanishes in every joint bin; dependence on the older observation would
// surface as a residual drift across the xi_{index-1} bins.
struct MarkovCheck {
  double max_abs_t = 0.0;  // max |mean residual| / standard error
  int evaluated_bins = 0;
  int skipped_bins = 0;    // joint bins with fewer than min_bin_count paths
};

MarkovCheck markov_reduction_check(const TimeGrid& grid, const XFactor& factor,
                                   double sigma, int index, int paths,
                                   std::uint64_t seed, int bins = 8,
                                   int min_bin_count = 32);

}  // namespace pklab
