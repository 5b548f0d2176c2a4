#pragma once

// Small numerical utilities shared by the filtering and consumption solvers.

#include <vector>

namespace pklab {

struct Quadrature {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre nodes and weights on [-1, 1] (nodes ascending).
Quadrature gauss_legendre(int points);

// Same rule mapped onto [a, b].
Quadrature gauss_legendre(int points, double a, double b);

}  // namespace pklab
