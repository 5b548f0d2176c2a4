#pragma once

// Pricing kernels built from strictly increasing adapted drivers, and the
// structural decompositions a kernel admits.
//
// Given an adapted G with G_0 = 0, strictly increasing along every branch,
// and a declared terminal tail, the kernel is
//     pi_i = E_i[ G_M + tail ] - G_i,
// a strictly positive supermartingale.  The associated positive-return
// account has per-period return rbar_i = (G_i - G_{i-1})/pi_i, value
// Bbar_i = prod_{n<=i} (1 + rbar_n), and deflated value rhobar = pi * Bbar,
// a martingale.
//
// Infinite-horizon limits are represented by the declared tail: a tail of
// zero prices the kernel one index short of the driver's horizon (the last
// increment plays the tail's role), a strictly positive tail extends the
// kernel to the full horizon.  Residual truncation mass is always explicit,
// never absorbed silently.

#include <vector>

#include "pklab/lattice.hpp"
#include "pklab/tolerances.hpp"

namespace pklab {

struct IncreasingDriver {
  AdaptedProcess G;          // defined on [0, M], G_0 = 0
  std::vector<double> tail;  // per node at M; empty means all-zero

  // Throws unless G_0 = 0, G increases by more than margin along every
  // branch, and the tail is empty, all zero, or all strictly positive.
  void validate(double margin = tol::strictness) const;
};

// G from per-period increments g defined on [1, M] (tree lattices).
IncreasingDriver driver_from_increments(const AdaptedProcess& g,
                                        std::vector<double> tail = {});

struct PricingKernelBundle {
  AdaptedProcess pi;      // [0, K]
  AdaptedProcess rbar;    // [1, K], positive-return per-period rate
  AdaptedProcess Bbar;    // [0, K], Bbar_0 = 1
  AdaptedProcess rhobar;  // [0, K], pi * Bbar
};

PricingKernelBundle kernel_from_driver(const IncreasingDriver& d,
                                       double margin = tol::strictness);

// Unique decomposition pi = Y - A with Y a martingale and A previsible,
// increasing, A_first = 0.  Requires a supermartingale; on merged lattices
// the previsible values must agree across parents.
struct DoobParts {
  AdaptedProcess Y;
  AdaptedProcess A;
};

DoobParts doob_decompose(const AdaptedProcess& pi);

// G_i = sum_{n<=i} pi_n * rbar_n accumulated along paths (tree lattices);
// the Prop-4 round trip recovers the driver from its kernel bundle.
AdaptedProcess accumulate_rate_gains(const AdaptedProcess& pi,
                                     const AdaptedProcess& rbar);

// Reconstructs pi_i = E_i[ sum_{n>i} pi_n rbar_n + tail ] from the
// positive-return rate.  With tail = pi_N per terminal node the identity is
// exact; a zero tail understates pi by exactly E_i[pi_N].
AdaptedProcess kernel_as_conditional_tail(const AdaptedProcess& pi,
                                          const AdaptedProcess& rbar,
                                          const std::vector<double>& tail);

// Reconstructs pi_i = E_i[ sum_{n>=i, n<N} pi_n r_{n+1} P_{n,n+1} + tail ]
// from the previsible money-market rate r_{n+1} = pi_n / E_n[pi_{n+1}] - 1
// and the one-period bond.  Requires a strict supermartingale.
AdaptedProcess kernel_short_rate_form(const AdaptedProcess& pi,
                                      const std::vector<double>& tail,
                                      double margin = tol::strictness);

}  // namespace pklab
