#include "pklab/kernel.hpp"

#include <cmath>
#include <string>

#include "detail.hpp"

namespace pklab {

namespace {

using detail::assign_from_parent;
using detail::node_str;

// True when every entry is exactly zero; empty counts as zero.
bool all_zero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

void IncreasingDriver::validate(double margin) const {
  require(margin >= 0.0, "IncreasingDriver", "margin must be non-negative");
  require(G.first_index() == 0, "IncreasingDriver",
          "driver must be defined from index 0");
  require(G.at(0, 0) == 0.0, "IncreasingDriver",
          "driver must start at zero (G_0 = " + std::to_string(G.at(0, 0)) +
              ")");
  const LatticeSpace& s = G.space();
  const int m = G.last_index();
  require(m >= 1, "IncreasingDriver", "driver must span at least one period");
  for (int i = 0; i < m; ++i) {
    for (NodeId k = 0; k < s.node_count(i); ++k) {
      const double gi = G.at(i, k);
      for (NodeId v : s.children(i, k)) {
        require(G.at(i + 1, v) - gi > margin, "IncreasingDriver",
                "driver not strictly increasing on branch " + node_str(i, k) +
                    " -> " + node_str(i + 1, v));
      }
    }
  }
  if (!tail.empty()) {
    require(tail.size() == s.node_count(m), "IncreasingDriver",
            "tail must list one value per terminal node");
    bool any_zero = false;
    bool any_pos = false;
    for (double t : tail) {
      require(t >= 0.0, "IncreasingDriver", "tail must be non-negative");
      if (t == 0.0)
        any_zero = true;
      else
        any_pos = true;
    }
    require(!(any_zero && any_pos), "IncreasingDriver",
            "tail must be all zero or strictly positive everywhere");
  }
}

IncreasingDriver driver_from_increments(const AdaptedProcess& g,
                                        std::vector<double> tail) {
  require(g.first_index() == 1, "driver_from_increments",
          "increments must be defined on [1, M]");
  const LatticeSpace& s = g.space();
  const int m = g.last_index();
  AdaptedProcess G(s, 0, m);
  for (int i = 1; i <= m; ++i) {
    auto lv = G.level(i);
    std::vector<bool> seen(lv.size(), false);
    std::vector<double> vals(lv.size());
    for (NodeId u = 0; u < s.node_count(i - 1); ++u) {
      const double base = G.at(i - 1, u);
      for (NodeId v : s.children(i - 1, u)) {
        assign_from_parent(vals, seen, v, base + g.at(i, v),
                           "driver_from_increments", i);
      }
    }
    for (std::size_t k = 0; k < vals.size(); ++k) lv[k] = vals[k];
  }
  return IncreasingDriver{std::move(G), std::move(tail)};
}

PricingKernelBundle kernel_from_driver(const IncreasingDriver& d,
                                       double margin) {
  d.validate(margin);
  const LatticeSpace& s = d.G.space();
  const int m = d.G.last_index();
  const bool zero_tail = all_zero(d.tail);
  const int k_last = zero_tail ? m - 1 : m;
  require(k_last >= 1, "kernel_from_driver",
          "driver horizon too short: a zero tail prices one index short of "
          "the driver's last index");

  // Terminal mass G_M + tail, then its conditional-expectation surface.
  AdaptedProcess u(s, m, m);
  {
    auto lv = u.level(m);
    const auto gm = d.G.level(m);
    for (std::size_t k = 0; k < lv.size(); ++k)
      lv[k] = gm[k] + (d.tail.empty() ? 0.0 : d.tail[k]);
  }
  const AdaptedProcess surf = expectation_surface(u, m);

  AdaptedProcess pi(s, 0, k_last);
  for (int i = 0; i <= k_last; ++i) {
    auto lv = pi.level(i);
    const auto sv = surf.level(i);
    const auto gv = d.G.level(i);
    for (NodeId k = 0; k < lv.size(); ++k) {
      lv[k] = sv[k] - gv[k];
      require(lv[k] > 0.0, "kernel_from_driver",
              "computed kernel not strictly positive at node " +
                  node_str(i, k));
    }
  }

  // Per-period increments along branches, then the positive-return account.
  AdaptedProcess rbar(s, 1, k_last);
  AdaptedProcess bbar(s, 0, k_last);
  bbar.at(0, 0) = 1.0;
  for (int i = 1; i <= k_last; ++i) {
    auto rl = rbar.level(i);
    auto bl = bbar.level(i);
    std::vector<double> rv(rl.size());
    std::vector<double> bv(bl.size());
    std::vector<bool> rseen(rl.size(), false);
    std::vector<bool> bseen(bl.size(), false);
    for (NodeId uu = 0; uu < s.node_count(i - 1); ++uu) {
      for (NodeId v : s.children(i - 1, uu)) {
        const double inc = d.G.at(i, v) - d.G.at(i - 1, uu);
        assign_from_parent(rv, rseen, v, inc / pi.at(i, v),
                           "kernel_from_driver", i);
        assign_from_parent(bv, bseen, v, bbar.at(i - 1, uu) * (1.0 + rv[v]),
                           "kernel_from_driver", i);
      }
    }
    for (std::size_t k = 0; k < rv.size(); ++k) {
      rl[k] = rv[k];
      bl[k] = bv[k];
    }
  }

  AdaptedProcess rho(s, 0, k_last);
  for (int i = 0; i <= k_last; ++i) {
    auto rl = rho.level(i);
    const auto pl = pi.level(i);
    const auto bl = bbar.level(i);
    for (std::size_t k = 0; k < rl.size(); ++k) rl[k] = pl[k] * bl[k];
  }

  return PricingKernelBundle{std::move(pi), std::move(rbar), std::move(bbar),
                             std::move(rho)};
}

DoobParts doob_decompose(const AdaptedProcess& pi) {
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();
  require(last > first, "doob_decompose",
          "process must span at least two indices");

  AdaptedProcess a(s, first, last);
  for (double& v : a.level(first)) v = 0.0;
  for (int i = first; i < last; ++i) {
    const auto next = pi.level(i + 1);
    const std::vector<double> cexp =
        one_step_expectation(s, i, {next.data(), next.size()});
    auto al = a.level(i + 1);
    std::vector<double> vals(al.size());
    std::vector<bool> seen(al.size(), false);
    for (NodeId u = 0; u < s.node_count(i); ++u) {
      const double inc = pi.at(i, u) - cexp[u];
      require(inc >= -tol::strictness, "doob_decompose",
              "input not a supermartingale: conditional mean rises by " +
                  std::to_string(-inc) + " at node " + node_str(i, u));
      const double base = a.at(i, u);
      for (NodeId v : s.children(i, u)) {
        assign_from_parent(vals, seen, v, base + inc, "doob_decompose", i + 1);
      }
    }
    for (std::size_t k = 0; k < vals.size(); ++k) al[k] = vals[k];
  }

  AdaptedProcess y(s, first, last);
  for (int i = first; i <= last; ++i) {
    auto yl = y.level(i);
    const auto pl = pi.level(i);
    const auto al = a.level(i);
    for (std::size_t k = 0; k < yl.size(); ++k) yl[k] = pl[k] + al[k];
  }
  return DoobParts{std::move(y), std::move(a)};
}

AdaptedProcess accumulate_rate_gains(const AdaptedProcess& pi,
                                     const AdaptedProcess& rbar) {
  require(&pi.space() == &rbar.space(), "accumulate_rate_gains",
          "kernel and rate live on different lattices");
  const int first = pi.first_index();
  const int last = pi.last_index();
  require(rbar.first_index() == first + 1 && rbar.last_index() == last,
          "accumulate_rate_gains",
          "rate must be defined on [first+1, last] of the kernel's range");
  const LatticeSpace& s = pi.space();

  AdaptedProcess g(s, first, last);
  for (double& v : g.level(first)) v = 0.0;
  for (int i = first + 1; i <= last; ++i) {
    auto gl = g.level(i);
    std::vector<double> vals(gl.size());
    std::vector<bool> seen(gl.size(), false);
    for (NodeId u = 0; u < s.node_count(i - 1); ++u) {
      const double base = g.at(i - 1, u);
      for (NodeId v : s.children(i - 1, u)) {
        assign_from_parent(vals, seen, v, base + pi.at(i, v) * rbar.at(i, v),
                           "accumulate_rate_gains", i);
      }
    }
    for (std::size_t k = 0; k < vals.size(); ++k) gl[k] = vals[k];
  }
  return g;
}

AdaptedProcess kernel_as_conditional_tail(const AdaptedProcess& pi,
                                          const AdaptedProcess& rbar,
                                          const std::vector<double>& tail) {
  require(&pi.space() == &rbar.space(), "kernel_as_conditional_tail",
          "kernel and rate live on different lattices");
  const int first = pi.first_index();
  const int last = pi.last_index();
  require(rbar.first_index() == first + 1 && rbar.last_index() == last,
          "kernel_as_conditional_tail",
          "rate must be defined on [first+1, last] of the kernel's range");
  const LatticeSpace& s = pi.space();
  require(tail.size() == s.node_count(last), "kernel_as_conditional_tail",
          "horizon tail must list one value per terminal node");

  AdaptedProcess out(s, first, last);
  {
    auto lv = out.level(last);
    for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = tail[k];
  }
  std::vector<double> cur(tail);
  for (int i = last - 1; i >= first; --i) {
    const auto pl = pi.level(i + 1);
    const auto rl = rbar.level(i + 1);
    std::vector<double> carry(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k)
      carry[k] = cur[k] + pl[k] * rl[k];
    cur = one_step_expectation(s, i, {carry.data(), carry.size()});
    auto lv = out.level(i);
    for (std::size_t k = 0; k < cur.size(); ++k) lv[k] = cur[k];
  }
  return out;
}

AdaptedProcess kernel_short_rate_form(const AdaptedProcess& pi,
                                      const std::vector<double>& tail,
                                      double margin) {
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();
  require(last > first, "kernel_short_rate_form",
          "process must span at least two indices");
  require(tail.size() == s.node_count(last), "kernel_short_rate_form",
          "horizon tail must list one value per terminal node");
  require(supermartingale_margin(pi) > margin, "kernel_short_rate_form",
          "kernel does not admit a positive short rate (not a strict "
          "supermartingale at margin " +
              std::to_string(margin) + ")");

  AdaptedProcess out(s, first, last);
  {
    auto lv = out.level(last);
    for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = tail[k];
  }
  std::vector<double> cur(tail);
  for (int i = last - 1; i >= first; --i) {
    const auto next = pi.level(i + 1);
    const std::vector<double> e =
        one_step_expectation(s, i, {next.data(), next.size()});
    const std::vector<double> v = one_step_expectation(
        s, i, {cur.data(), cur.size()});
    auto lv = out.level(i);
    const auto pl = pi.level(i);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double r = pl[k] / e[k] - 1.0;
      const double p01 = e[k] / pl[k];
      lv[k] = pl[k] * r * p01 + v[k];
    }
    cur.assign(lv.begin(), lv.end());
  }
  return out;
}

}  // namespace pklab
