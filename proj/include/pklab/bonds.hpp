#pragma once

// Discount-bond systems induced by a pricing kernel: the full surface
// P_ij = E_i[pi_j] / pi_i, rational (separable-factor) models with closed
// forms, the natural money-market account with its previsible rate, the
// positive-martingale family representation of the surface, and the bridge
// between the kernel's Doob decomposition and the money-market flow.

#include <iosfwd>
#include <vector>

#include "pklab/kernel.hpp"
#include "pklab/lattice.hpp"
#include "pklab/tolerances.hpp"

namespace pklab {

class DiscountBondSurface {
 public:
  int first_index() const { return first_; }
  int horizon() const { return last_; }
  const LatticeSpace& space() const { return *space_; }

  // Price at (i, k) of the bond maturing at j, first <= i < j <= horizon.
  double P(int i, NodeId k, int j) const;
  // Simple rate over [i, j]: R = 1/P - 1.
  double R(int i, NodeId k, int j) const;

  // Rows "i,node-id,j,P,R" over all i < j.
  void write_csv(std::ostream& os) const;

 private:
  friend DiscountBondSurface bond_surface(const AdaptedProcess&, double);
  const LatticeSpace* space_ = nullptr;
  int first_ = 0;
  int last_ = 0;
  // Per level i: node-major block of prices for j in (i, horizon].
  std::vector<std::vector<double>> values_;
  double entry(int i, NodeId k, int j, const char* where) const;
};

// Requires a strictly positive kernel whose conditional mean drops by more
// than margin at every node, so every bond prices strictly below par.
DiscountBondSurface bond_surface(const AdaptedProcess& pi,
                                 double margin = tol::strictness);

// Kernel pi_i = alpha_i + beta_i N_i with deterministic strictly
// decreasing positive coefficient sequences and a strictly positive
// martingale factor N.
struct RationalModel {
  std::vector<double> alpha;
  std::vector<double> beta;
  AdaptedProcess factor;
  AdaptedProcess pi;

  // (alpha_j + beta_j N_i) / (alpha_i + beta_i N_i).
  double closed_form_P(int i, NodeId k, int j) const;

  // Money-market account via the coefficient product
  // B_i = prod_{n<=i} (alpha_{n-1} + beta_{n-1} N_{n-1}) /
  //                   (alpha_n     + beta_n     N_{n-1})   (tree lattices).
  AdaptedProcess mma_product() const;
};

RationalModel rational_model(std::vector<double> alpha,
                             std::vector<double> beta,
                             const AdaptedProcess& factor,
                             double mart_tol = tol::martingale);

// Money-market account grown at the previsible rate
// r_{i+1} = pi_i / E_i[pi_{i+1}] - 1: B is predictable one step ahead and
// rho = pi B is a martingale.
struct MoneyMarketAccount {
  AdaptedProcess r;    // [first+1, last]
  AdaptedProcess B;    // [first, last], B_first = 1
  AdaptedProcess rho;  // pi * B
};

MoneyMarketAccount natural_mma(const AdaptedProcess& pi,
                               double margin = tol::strictness);

// Representation of the surface through a family of positive martingales:
// P_ij = sum_{n>j} m_in / sum_{n>i} m_in, elements n = 1..N+1 with the
// final element carrying the declared tail mass.
class PositiveMartingaleFamily {
 public:
  int kernel_horizon() const { return last_; }
  int element_count() const { return static_cast<int>(m_.size()); }
  // Element n in [1, element_count()], defined for i in [0, min(n, N)].
  const AdaptedProcess& element(int n) const;
  double reconstruct_P(int i, NodeId k, int j) const;

 private:
  friend PositiveMartingaleFamily fh_family(const AdaptedProcess&, double);
  friend PositiveMartingaleFamily fh_family(const IncreasingDriver&, double);
  std::vector<AdaptedProcess> m_;
  int last_ = 0;
};

// From the kernel alone: the previsible Doob increments
// a_n = pi_{n-1} - E_{n-1}[pi_n] act as the driver increments and the tail
// element carries E_i[pi_N].
PositiveMartingaleFamily fh_family(const AdaptedProcess& pi,
                                   double margin = tol::strictness);

// From a driver: m_in = E_i[g_n] over the driver's own increments, with
// the declared tail as the final element.
PositiveMartingaleFamily fh_family(const IncreasingDriver& d,
                                   double margin = tol::strictness);

// Diagnostics tying the Doob decomposition to the money-market flow:
// the previsible increment equals pi_n r_{n+1} P_{n,n+1}, the accumulated
// flow reproduces A, and the induced per-period return
// rbar_i = r_i pi_{i-1} P_{i-1,i} / pi_i rebuilds the kernel through its
// conditional-tail form.
struct DoobMmaBridge {
  double max_summand_gap = 0.0;  // | pi_n r P - (pi_n - E_n[pi_{n+1}]) |
  double max_gains_gap = 0.0;    // | accumulated flow - Doob A |
  double max_kernel_gap = 0.0;   // | pi - conditional-tail rebuild |
  double min_induced_rbar = 0.0;
};

DoobMmaBridge doob_vs_mma_bridge(const AdaptedProcess& pi,
                                 double margin = tol::strictness);

}  // namespace pklab
