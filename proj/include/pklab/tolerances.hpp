#pragma once

// Default numerical tolerances used across the library and the verification
// suites.  Construction identities on trees are exact up to rounding, so the
// defaults are tight; statistical checks use standard-error multiples instead
// and do not appear here.

namespace pklab::tol {

// Strictness margin for "strictly positive / strictly increasing / strict
// supermartingale" requirements.
inline constexpr double strictness = 1e-12;

// One-step martingale identities certified on computed processes.
inline constexpr double martingale = 1e-12;

// Exact reconstruction identities (Doob parts, product forms).
inline constexpr double reconstruction = 1e-13;

// Identities that compound several conditional expectations.
inline constexpr double identity = 1e-11;

// Certification of the deflated-gains martingale property before a
// decomposition result is trusted.
inline constexpr double gains_cert = 1e-10;

}  // namespace pklab::tol
