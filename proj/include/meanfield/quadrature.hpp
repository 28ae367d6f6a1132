#pragma once

#include <vector>

namespace meanfield {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Composite trapezoid rule for samples on a uniform grid of spacing h.
double trapezoid(const std::vector<double>& f, double h);

}  // namespace meanfield
