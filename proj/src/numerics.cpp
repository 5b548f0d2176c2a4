#include "pklab/numerics.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace pklab {

Quadrature gauss_legendre(int points) {
  if (points < 1)
    throw std::invalid_argument("gauss_legendre: need at least 1 point, got " +
                                std::to_string(points));
  const int n = points;
  Quadrature q;
  q.x.resize(static_cast<std::size_t>(n));
  q.w.resize(static_cast<std::size_t>(n));

  // Roots of P_n by Newton iteration from the Chebyshev-like initial guess;
  // exploit the symmetry x_{n-1-m} = -x_m.
  const int half = (n + 1) / 2;
  for (int m = 0; m < half; ++m) {
    double x = std::cos(M_PI * (m + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Recurrence (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
      double p0 = 1.0;
      double p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const std::size_t lo = static_cast<std::size_t>(m);
    const std::size_t hi = static_cast<std::size_t>(n - 1 - m);
    q.x[lo] = -x;
    q.x[hi] = x;
    q.w[lo] = q.w[hi] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n % 2 == 1) q.x[static_cast<std::size_t>(half - 1)] = 0.0;
  return q;
}

Quadrature gauss_legendre(int points, double a, double b) {
  if (!(b > a))
    throw std::invalid_argument(
        "gauss_legendre: interval must satisfy a < b, got [" +
        std::to_string(a) + ", " + std::to_string(b) + "]");
  Quadrature q = gauss_legendre(points);
  const double mid = 0.5 * (a + b);
  const double scale = 0.5 * (b - a);
  for (std::size_t m = 0; m < q.x.size(); ++m) {
    q.x[m] = mid + scale * q.x[m];
    q.w[m] *= scale;
  }
  return q;
}

}  // namespace pklab
