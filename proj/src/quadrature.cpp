#include "meanfield/quadrature.hpp"

#include <algorithm>

#include <boost/math/special_functions/legendre.hpp>

#include "meanfield/errors.hpp"

namespace meanfield {

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw ConfigError("quadrature needs at least one node");
  // legendre_p_zeros returns the nonnegative zeros in increasing order.
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> x;
  for (double z : zeros) {
    x.push_back(z);
    if (z != 0.0) x.push_back(-z);
  }
  std::sort(x.begin(), x.end());
  QuadratureRule rule;
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (double z : x) {
    const double dp = boost::math::legendre_p_prime(n, z);
    rule.nodes.push_back(mid + half * z);
    rule.weights.push_back(half * 2.0 / ((1.0 - z * z) * dp * dp));
  }
  return rule;
}

double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * h;
}

}  // namespace meanfield
