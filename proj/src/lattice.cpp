#include "pklab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace pklab {

namespace {
constexpr double kProbSumTol = 1e-14;
// Rounding slack when classifying a computed process as a supermartingale.
constexpr double kSupermartingaleSlack = 1e-12;
}

void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

void require(bool ok, const char* where, const std::string& what) {
  if (!ok) fail(where, what);
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  require(times_.size() >= 2, "TimeGrid", "need at least two time points");
  require(times_.front() >= 0.0, "TimeGrid", "t0 must be non-negative");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    require(times_[i] > times_[i - 1], "TimeGrid",
            "times must be strictly increasing (violated at index " +
                std::to_string(i) + ")");
  }
}

TimeGrid TimeGrid::uniform(double t0, double dt, int periods) {
  require(periods >= 1, "TimeGrid::uniform", "periods must be >= 1");
  require(dt > 0.0, "TimeGrid::uniform", "dt must be positive");
  std::vector<double> t(static_cast<std::size_t>(periods) + 1);
  for (int i = 0; i <= periods; ++i) t[static_cast<std::size_t>(i)] = t0 + dt * i;
  return TimeGrid(std::move(t));
}

double TimeGrid::operator[](int i) const {
  require(i >= 0 && i < size(), "TimeGrid",
          "time index " + std::to_string(i) + " out of range");
  return times_[static_cast<std::size_t>(i)];
}

LatticeBuilder::LatticeBuilder(TimeGrid grid) : grid_(std::move(grid)) {
  counts_.assign(static_cast<std::size_t>(grid_.size()), 0);
  edges_.resize(static_cast<std::size_t>(grid_.size()) - 1);
}

void LatticeBuilder::set_level_count(int i, NodeId count) {
  require(!done_, "LatticeBuilder", "builder already finalized");
  require(i >= 0 && i < grid_.size(), "LatticeBuilder",
          "level index " + std::to_string(i) + " out of range");
  require(count >= 1, "LatticeBuilder", "level must have at least one node");
  require(i != 0 || count == 1, "LatticeBuilder",
          "level 0 must hold the single root node");
  counts_[static_cast<std::size_t>(i)] = count;
  if (i < grid_.size() - 1)
    edges_[static_cast<std::size_t>(i)].resize(count);
}

void LatticeBuilder::add_edge(int i, NodeId from, NodeId to, double prob) {
  require(!done_, "LatticeBuilder", "builder already finalized");
  require(i >= 0 && i < grid_.size() - 1, "LatticeBuilder",
          "edge level " + std::to_string(i) + " out of range");
  require(counts_[static_cast<std::size_t>(i)] > 0 &&
              counts_[static_cast<std::size_t>(i) + 1] > 0,
          "LatticeBuilder",
          "set level counts before adding edges at level " + std::to_string(i));
  require(from < counts_[static_cast<std::size_t>(i)], "LatticeBuilder",
          "edge source node out of range at level " + std::to_string(i));
  require(to < counts_[static_cast<std::size_t>(i) + 1], "LatticeBuilder",
          "edge target node out of range at level " + std::to_string(i + 1));
  require(prob > 0.0 && prob <= 1.0, "LatticeBuilder",
          "branch probability must lie in (0, 1], got " +
              std::to_string(prob));
  edges_[static_cast<std::size_t>(i)][from].emplace_back(to, prob);
}

LatticeSpace LatticeBuilder::finalize() {
  require(!done_, "LatticeBuilder", "builder already finalized");
  done_ = true;
  const int n = grid_.last_index();
  for (int i = 0; i <= n; ++i) {
    require(counts_[static_cast<std::size_t>(i)] >= 1, "LatticeBuilder",
            "level " + std::to_string(i) + " has no nodes");
  }

  LatticeSpace s;
  s.grid_ = grid_;
  s.counts_ = counts_;
  s.child_off_.resize(static_cast<std::size_t>(n));
  s.child_.resize(static_cast<std::size_t>(n));
  s.prob_.resize(static_cast<std::size_t>(n));
  s.parent_off_.resize(static_cast<std::size_t>(n) + 1);
  s.parent_.resize(static_cast<std::size_t>(n) + 1);
  s.node_prob_.resize(static_cast<std::size_t>(n) + 1);
  s.node_prob_[0] = {1.0};
  s.parent_off_[0] = {0, 0};

  for (int i = 0; i < n; ++i) {
    const auto li = static_cast<std::size_t>(i);
    const NodeId ci = counts_[li];
    const NodeId cn = counts_[li + 1];
    std::vector<std::uint32_t> indeg(cn, 0);
    auto& off = s.child_off_[li];
    auto& tgt = s.child_[li];
    auto& prb = s.prob_[li];
    off.assign(ci + 1, 0);
    for (NodeId k = 0; k < ci; ++k) {
      const auto& out = edges_[li][k];
      require(!out.empty(), "LatticeBuilder",
              "node (" + std::to_string(i) + ", " + std::to_string(k) +
                  ") has no successors");
      double sum = 0.0;
      for (const auto& [to, p] : out) {
        sum += p;
        ++indeg[to];
      }
      require(std::abs(sum - 1.0) <= kProbSumTol, "LatticeBuilder",
              "branch probabilities at node (" + std::to_string(i) + ", " +
                  std::to_string(k) + ") sum to " + std::to_string(sum));
      off[k + 1] = off[k] + static_cast<std::uint32_t>(out.size());
      for (const auto& [to, p] : out) {
        tgt.push_back(to);
        prb.push_back(p);
      }
    }

    // Parent adjacency for level i+1, plus reachability check.
    auto& poff = s.parent_off_[li + 1];
    auto& par = s.parent_[li + 1];
    poff.assign(cn + 1, 0);
    for (NodeId v = 0; v < cn; ++v) {
      require(indeg[v] >= 1, "LatticeBuilder",
              "node (" + std::to_string(i + 1) + ", " + std::to_string(v) +
                  ") is unreachable");
      if (indeg[v] > 1) s.is_tree_ = false;
      poff[v + 1] = poff[v] + indeg[v];
    }
    par.assign(poff[cn], 0);
    std::vector<std::uint32_t> cursor(poff.begin(), poff.end() - 1);
    for (NodeId k = 0; k < ci; ++k) {
      for (const auto& [to, p] : edges_[li][k]) {
        (void)p;
        par[cursor[to]++] = k;
      }
    }

    // Unconditional probabilities, forward pass in node order.
    auto& np = s.node_prob_[li + 1];
    np.assign(cn, 0.0);
    for (NodeId k = 0; k < ci; ++k) {
      const double pk = s.node_prob_[li][k];
      for (const auto& [to, p] : edges_[li][k]) np[to] += pk * p;
    }
  }
  return s;
}

LatticeSpace LatticeSpace::binomial_recombining(TimeGrid grid, double up_prob) {
  require(up_prob > 0.0 && up_prob < 1.0, "LatticeSpace::binomial_recombining",
          "up probability must lie in (0, 1), got " + std::to_string(up_prob));
  const int n = grid.last_index();
  LatticeBuilder b(std::move(grid));
  for (int i = 0; i <= n; ++i)
    b.set_level_count(i, static_cast<NodeId>(i) + 1);
  for (int i = 0; i < n; ++i) {
    for (NodeId k = 0; k <= static_cast<NodeId>(i); ++k) {
      b.add_edge(i, k, k, 1.0 - up_prob);
      b.add_edge(i, k, k + 1, up_prob);
    }
  }
  return b.finalize();
}

LatticeSpace LatticeSpace::binomial_tree(TimeGrid grid, double up_prob) {
  require(up_prob > 0.0 && up_prob < 1.0, "LatticeSpace::binomial_tree",
          "up probability must lie in (0, 1), got " + std::to_string(up_prob));
  const int n = grid.last_index();
  require(n <= 24, "LatticeSpace::binomial_tree",
          "horizon " + std::to_string(n) + " too deep for a full path tree");
  LatticeBuilder b(std::move(grid));
  for (int i = 0; i <= n; ++i)
    b.set_level_count(i, static_cast<NodeId>(1u) << i);
  for (int i = 0; i < n; ++i) {
    const NodeId ci = static_cast<NodeId>(1u) << i;
    for (NodeId k = 0; k < ci; ++k) {
      b.add_edge(i, k, 2 * k, 1.0 - up_prob);
      b.add_edge(i, k, 2 * k + 1, up_prob);
    }
  }
  return b.finalize();
}

LatticeSpace LatticeSpace::chain(TimeGrid grid) {
  const int n = grid.last_index();
  LatticeBuilder b(std::move(grid));
  for (int i = 0; i <= n; ++i) b.set_level_count(i, 1);
  for (int i = 0; i < n; ++i) b.add_edge(i, 0, 0, 1.0);
  return b.finalize();
}

void LatticeSpace::check_level(int i, const char* where) const {
  require(i >= 0 && i <= horizon(), where,
          "time index " + std::to_string(i) + " out of range [0, " +
              std::to_string(horizon()) + "]");
}

void LatticeSpace::check_node(int i, NodeId k, const char* where) const {
  check_level(i, where);
  require(k < counts_[static_cast<std::size_t>(i)], where,
          "node " + std::to_string(k) + " out of range at index " +
              std::to_string(i));
}

NodeId LatticeSpace::node_count(int i) const {
  check_level(i, "LatticeSpace::node_count");
  return counts_[static_cast<std::size_t>(i)];
}

std::span<const NodeId> LatticeSpace::children(int i, NodeId k) const {
  check_node(i, k, "LatticeSpace::children");
  require(i < horizon(), "LatticeSpace::children",
          "terminal nodes have no successors");
  const auto& off = child_off_[static_cast<std::size_t>(i)];
  const auto& ch = child_[static_cast<std::size_t>(i)];
  return {ch.data() + off[k], off[k + 1] - off[k]};
}

std::span<const double> LatticeSpace::branch_probs(int i, NodeId k) const {
  check_node(i, k, "LatticeSpace::branch_probs");
  require(i < horizon(), "LatticeSpace::branch_probs",
          "terminal nodes have no successors");
  const auto& off = child_off_[static_cast<std::size_t>(i)];
  const auto& pr = prob_[static_cast<std::size_t>(i)];
  return {pr.data() + off[k], off[k + 1] - off[k]};
}

std::span<const NodeId> LatticeSpace::parents(int i, NodeId k) const {
  check_node(i, k, "LatticeSpace::parents");
  require(i >= 1, "LatticeSpace::parents", "the root has no predecessors");
  const auto& off = parent_off_[static_cast<std::size_t>(i)];
  const auto& pa = parent_[static_cast<std::size_t>(i)];
  return {pa.data() + off[k], off[k + 1] - off[k]};
}

double LatticeSpace::node_prob(int i, NodeId k) const {
  check_node(i, k, "LatticeSpace::node_prob");
  return node_prob_[static_cast<std::size_t>(i)][k];
}

AdaptedProcess::AdaptedProcess(const LatticeSpace& space, int first, int last)
    : space_(&space), first_(first), last_(last) {
  require(first >= 0 && last <= space.horizon() && first <= last,
          "AdaptedProcess",
          "invalid index range [" + std::to_string(first) + ", " +
              std::to_string(last) + "] on horizon " +
              std::to_string(space.horizon()));
  values_.resize(static_cast<std::size_t>(last - first) + 1);
  for (int i = first; i <= last; ++i)
    values_[static_cast<std::size_t>(i - first)].assign(space.node_count(i),
                                                        0.0);
}

AdaptedProcess AdaptedProcess::constant(const LatticeSpace& space, double value,
                                        int first, int last) {
  AdaptedProcess x(space, first, last);
  for (int i = first; i <= last; ++i)
    for (double& v : x.level(i)) v = value;
  return x;
}

void AdaptedProcess::check_index(int i, const char* where) const {
  require(defined_at(i), where,
          "process undefined at index " + std::to_string(i) +
              " (defined on [" + std::to_string(first_) + ", " +
              std::to_string(last_) + "])");
}

double AdaptedProcess::at(int i, NodeId k) const {
  check_index(i, "AdaptedProcess::at");
  const auto& lv = values_[static_cast<std::size_t>(i - first_)];
  require(k < lv.size(), "AdaptedProcess::at",
          "node " + std::to_string(k) + " out of range at index " +
              std::to_string(i));
  return lv[k];
}

double& AdaptedProcess::at(int i, NodeId k) {
  check_index(i, "AdaptedProcess::at");
  auto& lv = values_[static_cast<std::size_t>(i - first_)];
  require(k < lv.size(), "AdaptedProcess::at",
          "node " + std::to_string(k) + " out of range at index " +
              std::to_string(i));
  return lv[k];
}

std::span<const double> AdaptedProcess::level(int i) const {
  check_index(i, "AdaptedProcess::level");
  const auto& lv = values_[static_cast<std::size_t>(i - first_)];
  return {lv.data(), lv.size()};
}

std::span<double> AdaptedProcess::level(int i) {
  check_index(i, "AdaptedProcess::level");
  auto& lv = values_[static_cast<std::size_t>(i - first_)];
  return {lv.data(), lv.size()};
}

namespace {

// One backward step: values on level i+1 -> conditional expectation on
// level i, summing children in stored order.
std::vector<double> step_back(const LatticeSpace& s, int i,
                              std::span<const double> next) {
  const NodeId ci = s.node_count(i);
  std::vector<double> out(ci);
  for (NodeId k = 0; k < ci; ++k) {
    const auto ch = s.children(i, k);
    const auto pr = s.branch_probs(i, k);
    double acc = 0.0;
    for (std::size_t e = 0; e < ch.size(); ++e) acc += pr[e] * next[ch[e]];
    out[k] = acc;
  }
  return out;
}

}  // namespace

std::vector<double> one_step_expectation(const LatticeSpace& s, int i,
                                         std::span<const double> next) {
  require(i >= 0 && i < s.horizon(), "one_step_expectation",
          "index " + std::to_string(i) + " out of range");
  require(next.size() == s.node_count(i + 1), "one_step_expectation",
          "value count does not match level " + std::to_string(i + 1));
  return step_back(s, i, next);
}

AdaptedProcess cond_expect(const AdaptedProcess& x, int j, int i) {
  require(x.defined_at(j), "cond_expect",
          "process undefined at index " + std::to_string(j));
  require(i >= 0 && i <= j, "cond_expect",
          "conditioning index " + std::to_string(i) +
              " must lie in [0, " + std::to_string(j) + "]");
  const LatticeSpace& s = x.space();
  std::vector<double> cur(x.level(j).begin(), x.level(j).end());
  for (int m = j - 1; m >= i; --m) cur = step_back(s, m, cur);
  AdaptedProcess out(s, i, i);
  auto lv = out.level(i);
  for (std::size_t k = 0; k < cur.size(); ++k) lv[k] = cur[k];
  return out;
}

AdaptedProcess expectation_surface(const AdaptedProcess& x, int j) {
  require(x.defined_at(j), "expectation_surface",
          "process undefined at index " + std::to_string(j));
  const LatticeSpace& s = x.space();
  AdaptedProcess out(s, 0, j);
  auto top = out.level(j);
  const auto src = x.level(j);
  for (std::size_t k = 0; k < src.size(); ++k) top[k] = src[k];
  std::vector<double> cur(src.begin(), src.end());
  for (int m = j - 1; m >= 0; --m) {
    cur = step_back(s, m, cur);
    auto lv = out.level(m);
    for (std::size_t k = 0; k < cur.size(); ++k) lv[k] = cur[k];
  }
  return out;
}

double expect(const AdaptedProcess& x, int j) {
  return cond_expect(x, j, 0).at(0, 0);
}

CheckResult martingale_defect(const AdaptedProcess& x) {
  CheckResult r;
  const LatticeSpace& s = x.space();
  for (int i = x.first_index(); i < x.last_index(); ++i) {
    const auto next = x.level(i + 1);
    const std::vector<double> cexp =
        step_back(s, i, {next.data(), next.size()});
    const auto cur = x.level(i);
    for (NodeId k = 0; k < cexp.size(); ++k) {
      const double d = std::abs(cexp[k] - cur[k]);
      if (d > r.max_deviation) {
        r.max_deviation = d;
        r.index = i;
        r.node = k;
      }
    }
  }
  return r;
}

double supermartingale_margin(const AdaptedProcess& x) {
  const LatticeSpace& s = x.space();
  require(x.last_index() > x.first_index(), "supermartingale_margin",
          "process must span at least two indices");
  double margin = std::numeric_limits<double>::infinity();
  for (int i = x.first_index(); i < x.last_index(); ++i) {
    const auto next = x.level(i + 1);
    const std::vector<double> cexp =
        step_back(s, i, {next.data(), next.size()});
    const auto cur = x.level(i);
    for (NodeId k = 0; k < cexp.size(); ++k)
      margin = std::min(margin, cur[k] - cexp[k]);
  }
  return margin;
}

bool is_martingale(const AdaptedProcess& x, double tol) {
  require(tol >= 0.0, "is_martingale", "tolerance must be non-negative");
  return martingale_defect(x).max_deviation <= tol;
}

bool is_strict_supermartingale(const AdaptedProcess& x, double margin) {
  require(margin >= 0.0, "is_strict_supermartingale",
          "strictness margin must be non-negative");
  return supermartingale_margin(x) > margin;
}

bool is_potential(const AdaptedProcess& x, double tail_tol) {
  require(tail_tol >= 0.0, "is_potential", "tail bound must be non-negative");
  for (int i = x.first_index(); i <= x.last_index(); ++i)
    for (double v : x.level(i))
      if (v < 0.0) return false;
  if (supermartingale_margin(x) < -kSupermartingaleSlack) return false;
  return expect(x, x.last_index()) <= tail_tol;
}

}  // namespace pklab
