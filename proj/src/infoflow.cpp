#include "pklab/infoflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "pklab/numerics.hpp"

namespace pklab {

namespace {

constexpr double kMassTol = 1e-10;  // |total mass - 1| allowed at construction

double total_mass(const std::vector<double>& w) {
  return std::accumulate(w.begin(), w.end(), 0.0);
}

}  // namespace

Prior Prior::discrete(std::vector<double> values, std::vector<double> weights) {
  const char* where = "Prior::discrete";
  require(!values.empty(), where, "need at least one atom");
  require(values.size() == weights.size(), where,
          "got " + std::to_string(values.size()) + " atoms but " +
              std::to_string(weights.size()) + " weights");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  Prior p;
  p.discrete_ = true;
  p.x_.reserve(values.size());
  p.w_.reserve(values.size());
  for (std::size_t idx : order) {
    const double v = values[idx];
    const double w = weights[idx];
    require(std::isfinite(v), where, "atom " + std::to_string(idx) +
                                         " is not finite");
    require(std::isfinite(w) && w >= 0.0, where,
            "weight " + std::to_string(idx) + " must be finite and >= 0");
    if (!p.x_.empty() && v == p.x_.back()) {
      p.w_.back() += w;  // merge duplicate atoms
    } else {
      p.x_.push_back(v);
      p.w_.push_back(w);
    }
  }
  const double total = total_mass(p.w_);
  require(std::abs(total - 1.0) <= kMassTol, where,
          "weights must sum to one, got " + std::to_string(total));
  p.lo_ = p.x_.front();
  p.hi_ = p.x_.back();

  p.cdf_x_ = p.x_;
  p.cdf_p_.resize(p.w_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < p.w_.size(); ++k) {
    acc += p.w_[k];
    p.cdf_p_[k] = acc / total;
  }
  p.cdf_p_.back() = 1.0;
  return p;
}

Prior Prior::density(std::function<double(double)> pdf, double lo, double hi,
                     int quadrature_points) {
  const char* where = "Prior::density";
  require(static_cast<bool>(pdf), where, "missing density callable");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, where,
          "support must be a bounded interval with lo < hi");
  require(quadrature_points >= 2, where, "need at least 2 quadrature points");

  const Quadrature q =
      gauss_legendre(quadrature_points, lo, hi);
  Prior p;
  p.discrete_ = false;
  p.lo_ = lo;
  p.hi_ = hi;
  p.x_ = q.x;
  p.w_.resize(q.x.size());
  for (std::size_t k = 0; k < q.x.size(); ++k) {
    const double d = pdf(q.x[k]);
    require(std::isfinite(d) && d >= 0.0, where,
            "density must be finite and >= 0 (violated at x = " +
                std::to_string(q.x[k]) + ")");
    p.w_[k] = q.w[k] * d;
  }
  const double total = total_mass(p.w_);
  require(std::abs(total - 1.0) <= kMassTol, where,
          "density must integrate to one over [" + std::to_string(lo) + ", " +
              std::to_string(hi) + "], got " + std::to_string(total));

  // Piecewise-linear cdf through the support endpoints and the nodes.
  p.cdf_x_.reserve(p.x_.size() + 2);
  p.cdf_p_.reserve(p.x_.size() + 2);
  p.cdf_x_.push_back(lo);
  p.cdf_p_.push_back(0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.w_.size(); ++k) {
    acc += p.w_[k];
    p.cdf_x_.push_back(p.x_[k]);
    p.cdf_p_.push_back(std::min(acc / total, 1.0));
  }
  p.cdf_x_.push_back(hi);
  p.cdf_p_.push_back(1.0);
  return p;
}

double Prior::expect(const std::function<double(double)>& f) const {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < x_.size(); ++k) {
    if (w_[k] <= 0.0) continue;
    num += w_[k] * f(x_[k]);
    den += w_[k];
  }
  return num / den;
}

double Prior::mean() const {
  return expect([](double v) { return v; });
}

double Prior::sample(CounterRng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (discrete_) {
    const auto it = std::upper_bound(cdf_p_.begin(), cdf_p_.end(), u);
    const std::size_t k = std::min(
        static_cast<std::size_t>(it - cdf_p_.begin()), cdf_p_.size() - 1);
    return cdf_x_[k];
  }
  const auto it = std::upper_bound(cdf_p_.begin(), cdf_p_.end(), u);
  if (it == cdf_p_.begin()) return cdf_x_.front();
  if (it == cdf_p_.end()) return cdf_x_.back();
  const std::size_t k = static_cast<std::size_t>(it - cdf_p_.begin());
  const double p0 = cdf_p_[k - 1];
  const double p1 = cdf_p_[k];
  if (p1 <= p0) return cdf_x_[k];
  const double frac = (u - p0) / (p1 - p0);
  return cdf_x_[k - 1] + frac * (cdf_x_[k] - cdf_x_[k - 1]);
}

namespace {

void check_reveal(const TimeGrid& grid, int reveal_index, const char* where) {
  require(grid[0] == 0.0, where, "grid must start at time 0");
  require(reveal_index >= 1 && reveal_index <= grid.last_index(), where,
          "reveal index " + std::to_string(reveal_index) +
              " must lie in [1, " + std::to_string(grid.last_index()) + "]");
}

}  // namespace

std::vector<double> sample_bridge(const TimeGrid& grid, int reveal_index,
                                  CounterRng& rng) {
  check_reveal(grid, reveal_index, "sample_bridge");
  const std::size_t n = static_cast<std::size_t>(reveal_index);
  std::vector<double> w(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double dt = grid[static_cast<int>(i)] -
                      grid[static_cast<int>(i) - 1];
    w[i] = w[i - 1] +
           std::normal_distribution<double>(0.0, std::sqrt(dt))(rng);
  }
  const double horizon_time = grid[reveal_index];
  const double terminal = w[n];
  std::vector<double> beta(n + 1);
  beta[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    beta[i] = w[i] - (grid[static_cast<int>(i)] / horizon_time) * terminal;
  beta[n] = 0.0;
  return beta;
}

InformationSample sample_information(const TimeGrid& grid,
                                     const XFactor& factor, double sigma,
                                     std::uint64_t seed, std::uint64_t path) {
  const char* where = "sample_information";
  check_reveal(grid, factor.reveal_index, where);
  require(sigma >= 0.0 && std::isfinite(sigma), where,
          "sigma must be finite and >= 0");

  CounterRng rng = stream_rng(seed, factor.stream, path);
  InformationSample out;
  out.x = factor.prior.sample(rng);
  out.xi = sample_bridge(grid, factor.reveal_index, rng);
  for (std::size_t i = 0; i < out.xi.size(); ++i)
    out.xi[i] += sigma * grid[static_cast<int>(i)] * out.x;
  return out;
}

double filter_expect(const TimeGrid& grid, const XFactor& factor, double sigma,
                     int index, double xi,
                     const std::function<double(double)>& f) {
  const char* where = "filter_expect";
  check_reveal(grid, factor.reveal_index, where);
  require(index >= 0 && index < factor.reveal_index, where,
          "index " + std::to_string(index) + " must lie in [0, " +
              std::to_string(factor.reveal_index) + ")");
  require(sigma >= 0.0 && std::isfinite(sigma), where,
          "sigma must be finite and >= 0");
  require(std::isfinite(xi), where, "observation must be finite");
  require(static_cast<bool>(f), where, "missing integrand");

  const double horizon_time = grid[factor.reveal_index];
  const double t = grid[index];
  const double c = horizon_time / (horizon_time - t);
  const auto xs = factor.prior.points();
  const auto ws = factor.prior.masses();

  // Posterior mass at x_k is w_k * exp(e_k) up to normalization; shift by the
  // largest exponent so the weights stay in [0, 1].
  std::vector<double> e(xs.size(), 0.0);
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (ws[k] <= 0.0) continue;
    e[k] = c * (sigma * xs[k] * xi -
                0.5 * sigma * sigma * xs[k] * xs[k] * t);
    shift = std::max(shift, e[k]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (ws[k] <= 0.0) continue;
    const double u = ws[k] * std::exp(e[k] - shift);
    num += u * f(xs[k]);
    den += u;
  }
  return num / den;
}

double filter_mean(const TimeGrid& grid, const XFactor& factor, double sigma,
                   int index, double xi) {
  return filter_expect(grid, factor, sigma, index, xi,
                       [](double v) { return v; });
}

double revealed_value(const TimeGrid& grid, const XFactor& factor,
                      double sigma, double xi_at_reveal) {
  const char* where = "revealed_value";
  check_reveal(grid, factor.reveal_index, where);
  require(sigma > 0.0 && std::isfinite(sigma), where,
          "sigma must be finite and > 0 to invert the observation");
  return xi_at_reveal / (sigma * grid[factor.reveal_index]);
}

namespace {

// Quantile bin edges (internal only) of a sample; bin b covers
// (edge_{b-1}, edge_b].
std::vector<double> quantile_edges(std::vector<double> xs, int bins) {
  std::sort(xs.begin(), xs.end());
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(bins) - 1);
  for (int b = 1; b < bins; ++b) {
    const std::size_t pos = xs.size() * static_cast<std::size_t>(b) /
                            static_cast<std::size_t>(bins);
    edges.push_back(xs[std::min(pos, xs.size() - 1)]);
  }
  return edges;
}

int bin_of(double v, const std::vector<double>& edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) -
                          edges.begin());
}

}  // namespace

MarkovCheck markov_reduction_check(const TimeGrid& grid, const XFactor& factor,
                                   double sigma, int index, int paths,
                                   std::uint64_t seed, int bins,
                                   int min_bin_count) {
  const char* where = "markov_reduction_check";
  check_reveal(grid, factor.reveal_index, where);
  require(index >= 1 && index + 1 <= factor.reveal_index, where,
          "index " + std::to_string(index) + " must lie in [1, " +
              std::to_string(factor.reveal_index - 1) + "]");
  require(paths >= bins * bins, where, "need at least one path per joint bin");
  require(bins >= 2, where, "need at least 2 bins per coordinate");
  require(min_bin_count >= 2, where, "need at least 2 samples per scored bin");

  // One-step prediction through the filter: given xi_i, the noise part is
  // xi_i - sigma t_i X and shrinks by s = (T - t_{i+1}) / (T - t_i), so
  // E[xi_{i+1} | xi_i] = s xi_i + sigma (t_{i+1} - s t_i) E[X | xi_i].
  const double horizon_time = grid[factor.reveal_index];
  const double t_curr = grid[index];
  const double t_next = grid[index + 1];
  const double shrink = (horizon_time - t_next) / (horizon_time - t_curr);

  const std::size_t n = static_cast<std::size_t>(paths);
  std::vector<double> prev(n);
  std::vector<double> curr(n);
  std::vector<double> y(n);  // prediction residual
  for (std::size_t p = 0; p < n; ++p) {
    const auto s = sample_information(grid, factor, sigma, seed, p);
    prev[p] = s.xi[static_cast<std::size_t>(index) - 1];
    curr[p] = s.xi[static_cast<std::size_t>(index)];
    const double est = filter_mean(grid, factor, sigma, index, curr[p]);
    const double pred =
        shrink * curr[p] + sigma * (t_next - shrink * t_curr) * est;
    y[p] = s.xi[static_cast<std::size_t>(index) + 1] - pred;
  }

  const auto curr_edges = quantile_edges(curr, bins);
  std::vector<std::vector<std::size_t>> members(
      static_cast<std::size_t>(bins));
  for (std::size_t p = 0; p < n; ++p)
    members[static_cast<std::size_t>(bin_of(curr[p], curr_edges))].push_back(p);

  MarkovCheck out;
  for (const auto& group : members) {
    if (group.size() < 2) {
      out.skipped_bins += bins;
      continue;
    }
    double group_mean = 0.0;
    std::vector<double> group_prev;
    group_prev.reserve(group.size());
    for (std::size_t p : group) {
      group_mean += y[p];
      group_prev.push_back(prev[p]);
    }
    group_mean /= static_cast<double>(group.size());

    // Conditional quantiles of the older observation within this bin.
    const auto prev_edges = quantile_edges(std::move(group_prev), bins);
    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(bins), 0.0);
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (std::size_t p : group) {
      const auto b = static_cast<std::size_t>(bin_of(prev[p], prev_edges));
      const double r = y[p] - group_mean;
      sum[b] += r;
      sumsq[b] += r * r;
      ++count[b];
    }
    for (int b = 0; b < bins; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      if (count[bi] < min_bin_count) {
        ++out.skipped_bins;
        continue;
      }
      const double nb = count[bi];
      const double mean = sum[bi] / nb;
      const double var =
          std::max(0.0, (sumsq[bi] - nb * mean * mean) / (nb - 1.0));
      const double se = std::sqrt(var / nb);
      double t;
      if (se > 0.0)
        t = std::abs(mean) / se;
      else
        t = (mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      out.max_abs_t = std::max(out.max_abs_t, t);
      ++out.evaluated_bins;
    }
  }
  require(out.evaluated_bins > 0, where,
          "no joint bin reached " + std::to_string(min_bin_count) +
              " samples; increase paths");
  return out;
}

}  // namespace pklab
