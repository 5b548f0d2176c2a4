#pragma once

// Finite event-tree probability spaces and processes adapted to them.
//
// A LatticeSpace is a levelled DAG: one root node at time index 0, every
// non-terminal node carries branch probabilities in (0,1] summing to one,
// and every node past the root has at least one predecessor.  A strict tree
// (exactly one predecessor per node) is the general carrier for the full
// framework; merged (recombining) lattices are supported wherever only
// conditional expectations are needed.
//
// An AdaptedProcess stores one value per node over a contiguous range of
// time indices.  Adaptedness is structural: a value is indexed by the node
// alone, so look-ahead is unrepresentable.
//
// Conditional expectations are computed by backward induction with the
// summation over children always performed in stored child order, so
// repeated application (tower property) reproduces the single application
// bit for bit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pklab {

using NodeId = std::uint32_t;

[[noreturn]] void fail(const std::string& where, const std::string& what);

void require(bool ok, const char* where, const std::string& what);

// Strictly increasing observation times, t0 >= 0.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);
  static TimeGrid uniform(double t0, double dt, int periods);

  int size() const { return static_cast<int>(times_.size()); }
  int last_index() const { return size() - 1; }
  double operator[](int i) const;
  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;
};

class LatticeSpace;

// Incremental construction of a LatticeSpace; finalize() validates the
// whole structure and computes unconditional node probabilities.
class LatticeBuilder {
 public:
  explicit LatticeBuilder(TimeGrid grid);
  void set_level_count(int i, NodeId count);
  void add_edge(int i, NodeId from, NodeId to, double prob);
  LatticeSpace finalize();

 private:
  TimeGrid grid_;
  std::vector<NodeId> counts_;
  std::vector<std::vector<std::vector<std::pair<NodeId, double>>>> edges_;
  bool done_ = false;
};

class LatticeSpace {
 public:
  // Recombining binomial lattice: i+1 nodes at index i, node k = number of
  // up moves, children (down, up) = (k, k+1).
  static LatticeSpace binomial_recombining(TimeGrid grid, double up_prob);

  // Full binomial path tree: 2^i nodes at index i, node id encodes the
  // move history in binary (bit 0 = latest move, 1 = up), children
  // (down, up) = (2k, 2k+1).
  static LatticeSpace binomial_tree(TimeGrid grid, double up_prob);

  // Single deterministic path (one node per level).
  static LatticeSpace chain(TimeGrid grid);

  const TimeGrid& grid() const { return grid_; }
  int horizon() const { return grid_.last_index(); }
  NodeId node_count(int i) const;

  std::span<const NodeId> children(int i, NodeId k) const;
  std::span<const double> branch_probs(int i, NodeId k) const;
  std::span<const NodeId> parents(int i, NodeId k) const;

  // Unconditional probability of reaching a node.
  double node_prob(int i, NodeId k) const;

  // True when every node has at most one predecessor.
  bool is_tree() const { return is_tree_; }

 private:
  friend class LatticeBuilder;
  LatticeSpace() = default;
  void check_level(int i, const char* where) const;
  void check_node(int i, NodeId k, const char* where) const;

  TimeGrid grid_{std::vector<double>{0.0, 1.0}};
  std::vector<NodeId> counts_;
  // Child adjacency per level i in [0, N-1], CSR over the level's nodes.
  std::vector<std::vector<std::uint32_t>> child_off_;
  std::vector<std::vector<NodeId>> child_;
  std::vector<std::vector<double>> prob_;
  // Parent adjacency per level i in [1, N].
  std::vector<std::vector<std::uint32_t>> parent_off_;
  std::vector<std::vector<NodeId>> parent_;
  std::vector<std::vector<double>> node_prob_;
  bool is_tree_ = true;
};

// One value per node for time indices first..last (inclusive).
class AdaptedProcess {
 public:
  AdaptedProcess(const LatticeSpace& space, int first, int last);
  static AdaptedProcess constant(const LatticeSpace& space, double value,
                                 int first, int last);

  const LatticeSpace& space() const { return *space_; }
  int first_index() const { return first_; }
  int last_index() const { return last_; }
  bool defined_at(int i) const { return i >= first_ && i <= last_; }

  double at(int i, NodeId k) const;
  double& at(int i, NodeId k);
  std::span<const double> level(int i) const;
  std::span<double> level(int i);

 private:
  void check_index(int i, const char* where) const;
  const LatticeSpace* space_;
  int first_;
  int last_;
  std::vector<std::vector<double>> values_;
};

// E[ next | F_i ] for values given on level i+1; one backward step.
std::vector<double> one_step_expectation(const LatticeSpace& s, int i,
                                         std::span<const double> next);

// E[x_j | F_i] as a process defined on the single index i.
AdaptedProcess cond_expect(const AdaptedProcess& x, int j, int i);

// E[x_j | F_i] for every i in [0, j].
AdaptedProcess expectation_surface(const AdaptedProcess& x, int j);

// Unconditional expectation of the level-j slice.
double expect(const AdaptedProcess& x, int j);

// Worst one-step deviation of a conditional-expectation identity, with the
// node where it occurs.
struct CheckResult {
  double max_deviation = 0.0;
  int index = -1;
  NodeId node = 0;
};

// max over i, nodes of |E_i[x_{i+1}] - x_i|.
CheckResult martingale_defect(const AdaptedProcess& x);

// min over i, nodes of x_i - E_i[x_{i+1}] (positive means strictly
// decreasing conditional mean everywhere).
double supermartingale_margin(const AdaptedProcess& x);

bool is_martingale(const AdaptedProcess& x, double tol);

// Strict supermartingale: every one-step conditional mean drops by more
// than margin.
bool is_strict_supermartingale(const AdaptedProcess& x, double margin);

// Potential: non-negative supermartingale whose unconditional mean at the
// final defined index is below tail_tol (finite-horizon stand-in for a
// vanishing tail; the residual mean is the disclosed truncation).
bool is_potential(const AdaptedProcess& x, double tail_tol);

}  // namespace pklab
