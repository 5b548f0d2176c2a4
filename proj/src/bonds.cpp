#include "pklab/bonds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "detail.hpp"

namespace pklab {

namespace {

using detail::assign_from_parent;
using detail::node_str;

void check_positive(const AdaptedProcess& pi, const char* where) {
  for (int i = pi.first_index(); i <= pi.last_index(); ++i) {
    const auto lv = pi.level(i);
    for (NodeId k = 0; k < lv.size(); ++k)
      require(lv[k] > 0.0, where,
              "kernel must be strictly positive (violated at node " +
                  node_str(i, k) + ")");
  }
}

void check_strict_supermartingale(const AdaptedProcess& pi, double margin,
                                  const char* where) {
  require(margin >= 0.0, where, "margin must be non-negative");
  require(pi.last_index() > pi.first_index(), where,
          "kernel must span at least two indices");
  require(supermartingale_margin(pi) > margin, where,
          "kernel's conditional mean must fall by more than " +
              std::to_string(margin) + " at every node");
}

}  // namespace

double DiscountBondSurface::entry(int i, NodeId k, int j,
                                  const char* where) const {
  require(i >= first_ && i < last_, where,
          "observation index " + std::to_string(i) + " out of range [" +
              std::to_string(first_) + ", " + std::to_string(last_ - 1) + "]");
  require(j > i && j <= last_, where,
          "maturity " + std::to_string(j) + " must lie in (" +
              std::to_string(i) + ", " + std::to_string(last_) + "]");
  const NodeId cn = space_->node_count(i);
  require(k < cn, where,
          "node " + std::to_string(k) + " out of range at index " +
              std::to_string(i));
  const std::size_t span = static_cast<std::size_t>(last_ - i);
  return values_[static_cast<std::size_t>(i - first_)]
                [k * span + static_cast<std::size_t>(j - i - 1)];
}

double DiscountBondSurface::P(int i, NodeId k, int j) const {
  return entry(i, k, j, "DiscountBondSurface::P");
}

double DiscountBondSurface::R(int i, NodeId k, int j) const {
  return 1.0 / entry(i, k, j, "DiscountBondSurface::R") - 1.0;
}

void DiscountBondSurface::write_csv(std::ostream& os) const {
  os << "i,node-id,j,P,R\n";
  char buf[128];
  for (int i = first_; i < last_; ++i) {
    for (NodeId k = 0; k < space_->node_count(i); ++k) {
      for (int j = i + 1; j <= last_; ++j) {
        const double p = P(i, k, j);
        std::snprintf(buf, sizeof(buf), "%d,%u,%d,%.17g,%.17g\n", i, k, j, p,
                      1.0 / p - 1.0);
        os << buf;
      }
    }
  }
}

DiscountBondSurface bond_surface(const AdaptedProcess& pi, double margin) {
  const char* where = "bond_surface";
  check_positive(pi, where);
  check_strict_supermartingale(pi, margin, where);
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();

  DiscountBondSurface surf;
  surf.space_ = &s;
  surf.first_ = first;
  surf.last_ = last;
  surf.values_.resize(static_cast<std::size_t>(last - first));
  for (int i = first; i < last; ++i) {
    const std::size_t span = static_cast<std::size_t>(last - i);
    surf.values_[static_cast<std::size_t>(i - first)].assign(
        s.node_count(i) * span, 0.0);
  }

  // One backward sweep per maturity.
  for (int j = first + 1; j <= last; ++j) {
    std::vector<double> cur(pi.level(j).begin(), pi.level(j).end());
    for (int i = j - 1; i >= first; --i) {
      cur = one_step_expectation(s, i, {cur.data(), cur.size()});
      const auto pl = pi.level(i);
      const std::size_t span = static_cast<std::size_t>(last - i);
      auto& block = surf.values_[static_cast<std::size_t>(i - first)];
      for (NodeId k = 0; k < cur.size(); ++k) {
        const double p = cur[k] / pl[k];
        require(p > 0.0 && p < 1.0, where,
                "bond price off (0, 1) at node " + node_str(i, k) +
                    " for maturity " + std::to_string(j));
        block[k * span + static_cast<std::size_t>(j - i - 1)] = p;
      }
    }
  }
  return surf;
}

double RationalModel::closed_form_P(int i, NodeId k, int j) const {
  require(i >= 0 && i < j && j <= pi.last_index(), "RationalModel",
          "need 0 <= i < j <= horizon");
  const double ni = factor.at(i, k);
  return (alpha[static_cast<std::size_t>(j)] +
          beta[static_cast<std::size_t>(j)] * ni) /
         (alpha[static_cast<std::size_t>(i)] +
          beta[static_cast<std::size_t>(i)] * ni);
}

AdaptedProcess RationalModel::mma_product() const {
  const LatticeSpace& s = pi.space();
  const int last = pi.last_index();
  AdaptedProcess b(s, 0, last);
  b.at(0, 0) = 1.0;
  for (int i = 1; i <= last; ++i) {
    auto bl = b.level(i);
    std::vector<double> vals(bl.size());
    std::vector<bool> seen(bl.size(), false);
    const double a_prev = alpha[static_cast<std::size_t>(i - 1)];
    const double b_prev = beta[static_cast<std::size_t>(i - 1)];
    const double a_cur = alpha[static_cast<std::size_t>(i)];
    const double b_cur = beta[static_cast<std::size_t>(i)];
    for (NodeId u = 0; u < s.node_count(i - 1); ++u) {
      const double nu = factor.at(i - 1, u);
      const double step = (a_prev + b_prev * nu) / (a_cur + b_cur * nu);
      const double val = b.at(i - 1, u) * step;
      for (NodeId v : s.children(i - 1, u)) {
        assign_from_parent(vals, seen, v, val, "RationalModel::mma_product",
                           i);
      }
    }
    for (std::size_t k = 0; k < vals.size(); ++k) bl[k] = vals[k];
  }
  return b;
}

RationalModel rational_model(std::vector<double> alpha,
                             std::vector<double> beta,
                             const AdaptedProcess& factor, double mart_tol) {
  const char* where = "rational_model";
  const LatticeSpace& s = factor.space();
  require(factor.first_index() == 0 && factor.last_index() == s.horizon(),
          where, "factor must be defined on the full grid");
  const std::size_t n = static_cast<std::size_t>(s.horizon()) + 1;
  require(alpha.size() == n && beta.size() == n, where,
          "alpha and beta must list one coefficient per time index");
  for (std::size_t m = 0; m < n; ++m) {
    require(alpha[m] > 0.0 && beta[m] > 0.0, where,
            "coefficients must be strictly positive (index " +
                std::to_string(m) + ")");
    if (m > 0) {
      require(alpha[m] < alpha[m - 1], where,
              "alpha must be strictly decreasing (index " + std::to_string(m) +
                  ")");
      require(beta[m] < beta[m - 1], where,
              "beta must be strictly decreasing (index " + std::to_string(m) +
                  ")");
    }
  }
  for (int i = 0; i <= s.horizon(); ++i) {
    const auto lv = factor.level(i);
    for (NodeId k = 0; k < lv.size(); ++k)
      require(lv[k] > 0.0, where,
              "factor must be strictly positive (node " + node_str(i, k) +
                  ")");
  }
  const CheckResult mart = martingale_defect(factor);
  require(mart.max_deviation <= mart_tol, where,
          "factor is not a martingale: deviation " +
              std::to_string(mart.max_deviation) + " at node " +
              node_str(mart.index, mart.node));

  AdaptedProcess pi(s, 0, s.horizon());
  for (int i = 0; i <= s.horizon(); ++i) {
    auto pl = pi.level(i);
    const auto fl = factor.level(i);
    for (std::size_t k = 0; k < pl.size(); ++k)
      pl[k] = alpha[static_cast<std::size_t>(i)] +
              beta[static_cast<std::size_t>(i)] * fl[k];
  }
  return RationalModel{std::move(alpha), std::move(beta), factor,
                       std::move(pi)};
}

MoneyMarketAccount natural_mma(const AdaptedProcess& pi, double margin) {
  const char* where = "natural_mma";
  check_positive(pi, where);
  check_strict_supermartingale(pi, margin, where);
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();

  AdaptedProcess r(s, first + 1, last);
  AdaptedProcess b(s, first, last);
  for (double& v : b.level(first)) v = 1.0;
  for (int i = first; i < last; ++i) {
    const auto next = pi.level(i + 1);
    const std::vector<double> e =
        one_step_expectation(s, i, {next.data(), next.size()});
    auto rl = r.level(i + 1);
    auto bl = b.level(i + 1);
    std::vector<double> rv(rl.size());
    std::vector<double> bv(bl.size());
    std::vector<bool> rseen(rl.size(), false);
    std::vector<bool> bseen(bl.size(), false);
    for (NodeId u = 0; u < s.node_count(i); ++u) {
      const double ru = pi.at(i, u) / e[u] - 1.0;
      const double bu = b.at(i, u) * (1.0 + ru);
      for (NodeId v : s.children(i, u)) {
        assign_from_parent(rv, rseen, v, ru, where, i + 1);
        assign_from_parent(bv, bseen, v, bu, where, i + 1);
      }
    }
    for (std::size_t k = 0; k < rv.size(); ++k) {
      rl[k] = rv[k];
      bl[k] = bv[k];
    }
  }

  AdaptedProcess rho(s, first, last);
  for (int i = first; i <= last; ++i) {
    auto hl = rho.level(i);
    const auto pl = pi.level(i);
    const auto bl = b.level(i);
    for (std::size_t k = 0; k < hl.size(); ++k) hl[k] = pl[k] * bl[k];
  }
  return MoneyMarketAccount{std::move(r), std::move(b), std::move(rho)};
}

const AdaptedProcess& PositiveMartingaleFamily::element(int n) const {
  require(n >= 1 && n <= element_count(), "PositiveMartingaleFamily",
          "element index " + std::to_string(n) + " out of range [1, " +
              std::to_string(element_count()) + "]");
  return m_[static_cast<std::size_t>(n - 1)];
}

double PositiveMartingaleFamily::reconstruct_P(int i, NodeId k, int j) const {
  require(i >= 0 && i < j && j <= last_, "PositiveMartingaleFamily",
          "need 0 <= i < j <= kernel horizon");
  double num = 0.0;
  double den = 0.0;
  for (int n = i + 1; n <= element_count(); ++n) {
    const double v = element(n).at(i, k);
    den += v;
    if (n > j) num += v;
  }
  return num / den;
}

namespace {

// Shared assembly: each increment (a positive F_n-measurable value stored
// on level n) becomes the martingale surface E_i[.]; the terminal mass at
// tail_level becomes the final element.
std::vector<AdaptedProcess> surfaces_from_increments(
    const LatticeSpace& s, const std::vector<std::vector<double>>& increments,
    const std::vector<double>& terminal_mass, int tail_level) {
  std::vector<AdaptedProcess> out;
  for (std::size_t n = 0; n < increments.size(); ++n) {
    const int level = static_cast<int>(n) + 1;
    AdaptedProcess x(s, level, level);
    auto lv = x.level(level);
    for (std::size_t q = 0; q < lv.size(); ++q) lv[q] = increments[n][q];
    out.push_back(expectation_surface(x, level));
  }
  AdaptedProcess t(s, tail_level, tail_level);
  {
    auto lv = t.level(tail_level);
    for (std::size_t q = 0; q < lv.size(); ++q) lv[q] = terminal_mass[q];
  }
  out.push_back(expectation_surface(t, tail_level));
  return out;
}

}  // namespace

PositiveMartingaleFamily fh_family(const AdaptedProcess& pi, double margin) {
  const char* where = "fh_family";
  require(pi.first_index() == 0, where, "kernel must be defined from index 0");
  check_positive(pi, where);
  check_strict_supermartingale(pi, margin, where);
  const LatticeSpace& s = pi.space();
  const int last = pi.last_index();

  // Previsible increments a_n = pi_{n-1} - E_{n-1}[pi_n] stored on level n,
  // for n = 1..N; the tail element carries the horizon value pi_N.
  std::vector<std::vector<double>> inc(static_cast<std::size_t>(last));
  for (int n = 1; n <= last; ++n) {
    const auto next = pi.level(n);
    const std::vector<double> e =
        one_step_expectation(s, n - 1, {next.data(), next.size()});
    std::vector<double> vals(s.node_count(n));
    std::vector<bool> seen(vals.size(), false);
    for (NodeId u = 0; u < s.node_count(n - 1); ++u) {
      const double a = pi.at(n - 1, u) - e[u];
      for (NodeId v : s.children(n - 1, u))
        assign_from_parent(vals, seen, v, a, where, n);
    }
    inc[static_cast<std::size_t>(n - 1)] = std::move(vals);
  }
  const auto pl = pi.level(last);
  const std::vector<double> tail(pl.begin(), pl.end());
  PositiveMartingaleFamily fam;
  fam.last_ = last;
  fam.m_ = surfaces_from_increments(s, inc, tail, last);
  return fam;
}

PositiveMartingaleFamily fh_family(const IncreasingDriver& d, double margin) {
  const char* where = "fh_family";
  d.validate(margin);
  const LatticeSpace& s = d.G.space();
  const int m = d.G.last_index();
  bool zero_tail = true;
  for (double t : d.tail)
    if (t != 0.0) zero_tail = false;
  const int k_last = zero_tail ? m - 1 : m;
  require(k_last >= 1, where, "driver horizon too short");

  std::vector<std::vector<double>> inc;
  const int n_increments = zero_tail ? m - 1 : m;
  for (int n = 1; n <= n_increments; ++n) {
    std::vector<double> vals(s.node_count(n));
    std::vector<bool> seen(vals.size(), false);
    for (NodeId u = 0; u < s.node_count(n - 1); ++u) {
      const double g_prev = d.G.at(n - 1, u);
      for (NodeId v : s.children(n - 1, u))
        assign_from_parent(vals, seen, v, d.G.at(n, v) - g_prev, where, n);
    }
    inc.push_back(std::move(vals));
  }

  std::vector<double> tail;
  if (zero_tail) {
    // The driver's last increment is the mass beyond the kernel horizon.
    tail.resize(s.node_count(m));
    std::vector<bool> seen(tail.size(), false);
    for (NodeId u = 0; u < s.node_count(m - 1); ++u) {
      const double g_prev = d.G.at(m - 1, u);
      for (NodeId v : s.children(m - 1, u))
        assign_from_parent(tail, seen, v, d.G.at(m, v) - g_prev, where, m);
    }
  } else {
    tail = d.tail;
  }
  PositiveMartingaleFamily fam;
  fam.last_ = k_last;
  fam.m_ = surfaces_from_increments(s, inc, tail, m);
  return fam;
}

DoobMmaBridge doob_vs_mma_bridge(const AdaptedProcess& pi, double margin) {
  const char* where = "doob_vs_mma_bridge";
  check_positive(pi, where);
  check_strict_supermartingale(pi, margin, where);
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();

  const MoneyMarketAccount mma = natural_mma(pi, margin);
  const DoobParts doob = doob_decompose(pi);

  DoobMmaBridge out;
  out.min_induced_rbar = std::numeric_limits<double>::infinity();

  // Induced per-period return and the flow summand, per branch.
  AdaptedProcess rbar(s, first + 1, last);
  AdaptedProcess flow(s, first, last);
  for (double& v : flow.level(first)) v = 0.0;
  for (int i = first; i < last; ++i) {
    const auto next = pi.level(i + 1);
    const std::vector<double> e =
        one_step_expectation(s, i, {next.data(), next.size()});
    auto rl = rbar.level(i + 1);
    auto fl = flow.level(i + 1);
    std::vector<double> rv(rl.size());
    std::vector<double> fv(fl.size());
    std::vector<bool> rseen(rl.size(), false);
    std::vector<bool> fseen(fl.size(), false);
    for (NodeId u = 0; u < s.node_count(i); ++u) {
      const double piu = pi.at(i, u);
      const double r_next = mma.r.at(i + 1, s.children(i, u)[0]);
      const double p_one = e[u] / piu;
      const double summand = piu * r_next * p_one;
      const double doob_inc = piu - e[u];
      out.max_summand_gap =
          std::max(out.max_summand_gap, std::abs(summand - doob_inc));
      for (NodeId v : s.children(i, u)) {
        const double rb = mma.r.at(i + 1, v) * piu * p_one / pi.at(i + 1, v);
        out.min_induced_rbar = std::min(out.min_induced_rbar, rb);
        assign_from_parent(rv, rseen, v, rb, where, i + 1);
        assign_from_parent(fv, fseen, v, flow.at(i, u) + summand, where,
                           i + 1);
      }
    }
    for (std::size_t k = 0; k < rv.size(); ++k) {
      rl[k] = rv[k];
      fl[k] = fv[k];
    }
  }

  for (int i = first; i <= last; ++i) {
    const auto fl = flow.level(i);
    const auto al = doob.A.level(i);
    for (std::size_t k = 0; k < fl.size(); ++k)
      out.max_gains_gap = std::max(out.max_gains_gap, std::abs(fl[k] - al[k]));
  }

  // Rebuild the kernel from the induced return through its tail form.
  const AdaptedProcess gains = accumulate_rate_gains(pi, rbar);
  AdaptedProcess top(s, last, last);
  {
    auto lv = top.level(last);
    const auto gl = gains.level(last);
    const auto pl = pi.level(last);
    for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = gl[k] + pl[k];
  }
  const AdaptedProcess surf = expectation_surface(top, last);
  for (int i = first; i <= last; ++i) {
    const auto sv = surf.level(i);
    const auto gl = gains.level(i);
    const auto pl = pi.level(i);
    for (std::size_t k = 0; k < sv.size(); ++k)
      out.max_kernel_gap =
          std::max(out.max_kernel_gap, std::abs(sv[k] - gl[k] - pl[k]));
  }
  return out;
}

}  // namespace pklab
