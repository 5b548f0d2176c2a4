#include "pklab/assets.hpp"

#include <cmath>
#include <string>

#include "detail.hpp"

namespace pklab {

namespace {

using detail::assign_from_parent;
using detail::node_str;

void check_asset_ranges(const Asset& a, const AdaptedProcess& pi,
                        const char* where) {
  require(&a.price.space() == &pi.space() &&
              &a.dividend.space() == &pi.space(),
          where, "asset and kernel live on different lattices");
  require(a.price.first_index() == pi.first_index() &&
              a.price.last_index() == pi.last_index(),
          where, "price must share the kernel's index range");
  require(a.dividend.first_index() == pi.first_index() + 1 &&
              a.dividend.last_index() == pi.last_index(),
          where, "dividends must be defined on [first+1, last]");
}

// Backward accumulation E_i[ sum_{n>i} pi_n flow_n + horizon ] where
// horizon is a per-node value at the last index.
std::vector<std::vector<double>> deflated_flow_value(
    const AdaptedProcess& flow, const AdaptedProcess& pi,
    std::span<const double> horizon) {
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();
  std::vector<std::vector<double>> out(
      static_cast<std::size_t>(last - first) + 1);
  out.back().assign(horizon.begin(), horizon.end());
  std::vector<double> cur(horizon.begin(), horizon.end());
  for (int i = last - 1; i >= first; --i) {
    const auto pl = pi.level(i + 1);
    const auto fl = flow.level(i + 1);
    std::vector<double> carry(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k)
      carry[k] = cur[k] + pl[k] * fl[k];
    cur = one_step_expectation(s, i, {carry.data(), carry.size()});
    out[static_cast<std::size_t>(i - first)] = cur;
  }
  return out;
}

}  // namespace

AdaptedProcess gains_process(const Asset& a, const AdaptedProcess& pi) {
  check_asset_ranges(a, pi, "gains_process");
  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();

  AdaptedProcess m(s, first, last);
  {
    auto lv = m.level(first);
    const auto sp = a.price.level(first);
    const auto pp = pi.level(first);
    for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = pp[k] * sp[k];
  }
  // Running dividend total accumulated along paths.
  std::vector<double> acc(s.node_count(first), 0.0);
  for (int i = first + 1; i <= last; ++i) {
    std::vector<double> nxt(s.node_count(i));
    std::vector<bool> seen(nxt.size(), false);
    for (NodeId u = 0; u < s.node_count(i - 1); ++u) {
      for (NodeId v : s.children(i - 1, u)) {
        assign_from_parent(nxt, seen, v,
                           acc[u] + pi.at(i, v) * a.dividend.at(i, v),
                           "gains_process", i);
      }
    }
    auto lv = m.level(i);
    for (NodeId k = 0; k < nxt.size(); ++k)
      lv[k] = pi.at(i, k) * a.price.at(i, k) + nxt[k];
    acc = std::move(nxt);
  }
  return m;
}

CheckResult pricing_defect(const Asset& a, const AdaptedProcess& pi) {
  return martingale_defect(gains_process(a, pi));
}

AdaptedProcess price_income_asset(const AdaptedProcess& dividend,
                                  const AdaptedProcess& pi,
                                  const std::vector<double>& terminal_value) {
  require(&dividend.space() == &pi.space(), "price_income_asset",
          "dividend and kernel live on different lattices");
  const int first = pi.first_index();
  const int last = pi.last_index();
  require(dividend.first_index() == first + 1 && dividend.last_index() == last,
          "price_income_asset", "dividends must be defined on [first+1, last]");
  const LatticeSpace& s = pi.space();
  const NodeId cn = s.node_count(last);
  require(terminal_value.empty() || terminal_value.size() == cn,
          "price_income_asset",
          "terminal value must list one value per terminal node");

  std::vector<double> horizon(cn, 0.0);
  if (!terminal_value.empty()) {
    const auto pl = pi.level(last);
    for (NodeId k = 0; k < cn; ++k) horizon[k] = pl[k] * terminal_value[k];
  }
  const auto value = deflated_flow_value(dividend, pi,
                                         {horizon.data(), horizon.size()});

  AdaptedProcess price(s, first, last);
  for (int i = first; i <= last; ++i) {
    auto lv = price.level(i);
    const auto pl = pi.level(i);
    const auto& v = value[static_cast<std::size_t>(i - first)];
    if (i == last) {
      for (std::size_t k = 0; k < lv.size(); ++k)
        lv[k] = terminal_value.empty() ? 0.0 : terminal_value[k];
    } else {
      for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = v[k] / pl[k];
    }
  }
  return price;
}

GrowthIncomeSplit growth_income_split(const Asset& a, const AdaptedProcess& pi,
                                      double cert_tol) {
  check_asset_ranges(a, pi, "growth_income_split");
  const CheckResult cert = pricing_defect(a, pi);
  require(cert.max_deviation <= cert_tol, "growth_income_split",
          "asset fails the deflated-gains martingale certification: "
          "deviation " +
              std::to_string(cert.max_deviation) + " at node " +
              node_str(cert.index, cert.node));

  const LatticeSpace& s = pi.space();
  const int first = pi.first_index();
  const int last = pi.last_index();

  AdaptedProcess terminal(s, last, last);
  {
    auto lv = terminal.level(last);
    const auto pl = pi.level(last);
    const auto sl = a.price.level(last);
    for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = pl[k] * sl[k];
  }
  AdaptedProcess m_full = expectation_surface(terminal, last);

  GrowthIncomeSplit out{AdaptedProcess(s, first, last),
                        AdaptedProcess(s, first, last),
                        AdaptedProcess(s, first, last)};
  for (int i = first; i <= last; ++i) {
    auto ml = out.m.level(i);
    auto gl = out.growth_value.level(i);
    auto il = out.income_value.level(i);
    const auto mf = m_full.level(i);
    const auto pl = pi.level(i);
    const auto sl = a.price.level(i);
    for (std::size_t k = 0; k < ml.size(); ++k) {
      ml[k] = mf[k];
      gl[k] = mf[k] / pl[k];
      il[k] = sl[k] - gl[k];
    }
  }
  return out;
}

double transversality_defect(const Asset& a, const AdaptedProcess& pi) {
  check_asset_ranges(a, pi, "transversality_defect");
  const LatticeSpace& s = pi.space();
  const int last = pi.last_index();
  double total = 0.0;
  const auto pl = pi.level(last);
  const auto sl = a.price.level(last);
  for (NodeId k = 0; k < s.node_count(last); ++k)
    total += s.node_prob(last, k) * pl[k] * sl[k];
  return total;
}

Asset constant_value_asset(const AdaptedProcess& account) {
  const LatticeSpace& s = account.space();
  const int first = account.first_index();
  const int last = account.last_index();
  require(last > first, "constant_value_asset",
          "account must span at least two indices");

  AdaptedProcess dividend(s, first + 1, last);
  for (int i = first + 1; i <= last; ++i) {
    auto dl = dividend.level(i);
    std::vector<double> vals(dl.size());
    std::vector<bool> seen(dl.size(), false);
    for (NodeId u = 0; u < s.node_count(i - 1); ++u) {
      const double prev = account.at(i - 1, u);
      for (NodeId v : s.children(i - 1, u)) {
        const double ret = (account.at(i, v) - prev) / prev;
        require(ret > 0.0, "constant_value_asset",
                "account not strictly increasing on branch " +
                    node_str(i - 1, u) + " -> " + node_str(i, v));
        assign_from_parent(vals, seen, v, ret, "constant_value_asset", i);
      }
    }
    for (std::size_t k = 0; k < vals.size(); ++k) dl[k] = vals[k];
  }
  return Asset{AdaptedProcess::constant(s, 1.0, first, last),
               std::move(dividend)};
}

PositiveReturnSolution binomial_positive_return(double S0, double U, double D,
                                                double B0, double B1,
                                                double Sbar0, double Dbar) {
  const char* where = "binomial_positive_return";
  require(S0 > 0.0 && U > 0.0 && D > 0.0, where,
          "risky payoffs and price must be positive");
  require(B0 > 0.0, where, "account value must be positive");
  require(B1 > B0, where, "account must grow (B1 > B0)");
  require(Sbar0 > 0.0 && Dbar > 0.0, where,
          "candidate price and down payoff must be positive");

  const double growth = B1 / B0;
  const double forward = S0 * growth;
  require(U > forward && forward > D, where,
          "inputs admit arbitrage: need U > S0 B1/B0 > D");
  const double pstar = (forward - D) / (U - D);

  const double ratio = Dbar / Sbar0;
  const double window = (growth - pstar) / (1.0 - pstar);
  require(ratio > 1.0, where,
          "down payoff does not return more than the price (Dbar/Sbar0 <= 1)");
  require(ratio < window, where,
          "down payoff too large for a positive-return completion "
          "(Dbar/Sbar0 >= (B1/B0 - p*)/(1 - p*))");

  const double ubar = (Sbar0 * growth - (1.0 - pstar) * Dbar) / pstar;
  return PositiveReturnSolution{pstar, ubar};
}

AdaptedProcess symmetric_income_price(const AdaptedProcess& dividend,
                                      const AdaptedProcess& pi,
                                      const AdaptedProcess& r,
                                      const std::vector<double>& terminal_value) {
  require(&dividend.space() == &pi.space() && &r.space() == &pi.space(),
          "symmetric_income_price",
          "dividend, rate, and kernel live on different lattices");
  const int first = pi.first_index();
  const int last = pi.last_index();
  require(dividend.first_index() == first + 1 && dividend.last_index() == last,
          "symmetric_income_price",
          "dividends must be defined on [first+1, last]");
  require(r.first_index() == first + 1 && r.last_index() == last,
          "symmetric_income_price", "rate must be defined on [first+1, last]");
  const LatticeSpace& s = pi.space();
  const NodeId cn = s.node_count(last);
  require(terminal_value.empty() || terminal_value.size() == cn,
          "symmetric_income_price",
          "terminal value must list one value per terminal node");

  std::vector<double> num_h(cn, 0.0);
  const auto pl = pi.level(last);
  if (!terminal_value.empty())
    for (NodeId k = 0; k < cn; ++k) num_h[k] = pl[k] * terminal_value[k];
  std::vector<double> den_h(pl.begin(), pl.end());

  const auto num = deflated_flow_value(dividend, pi,
                                       {num_h.data(), num_h.size()});
  const auto den = deflated_flow_value(r, pi, {den_h.data(), den_h.size()});

  AdaptedProcess price(s, first, last);
  for (int i = first; i <= last; ++i) {
    auto lv = price.level(i);
    const auto& nv = num[static_cast<std::size_t>(i - first)];
    const auto& dv = den[static_cast<std::size_t>(i - first)];
    if (i == last) {
      for (std::size_t k = 0; k < lv.size(); ++k)
        lv[k] = terminal_value.empty() ? 0.0 : terminal_value[k];
    } else {
      for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = nv[k] / dv[k];
    }
  }
  return price;
}

}  // namespace pklab
