#pragma once

#include <span>
#include <vector>

#include "meanfield/io.hpp"

namespace meanfield {

/// Scalar constants of the weighted-norm hierarchy estimate. `Lambda` = 0
/// selects lambda_min(q, sigma) and `theta_exp` = 0 selects default_theta.
/// C_const and theta_exp are not sharp: only the functional form of the
/// growth constant is asserted.
struct HierarchyParams {
  double q = 2.0;
  double p = 2.0;
  int d = 1;
  double sigma = 1.0;
  double Lambda = 0.0;
  double C_const = 1.0;
  double theta_exp = 0.0;
  double K_lp_norm = 0.0;
  double F0 = 1.0;
  double F = 1.0;
  int N = 2;
  /// Growth constant used by bounds_report instead of growth_constant when
  /// nonnegative (JSON key "L").
  double L_override = -1.0;

  double effective_Lambda() const;
  double effective_theta() const;
};

void to_json(Json& j, const HierarchyParams& p);
void from_json(const Json& j, HierarchyParams& p);

/// ConfigError on out-of-range fields, ExponentViolation if 1/p + 1/q > 1,
/// OutOfRegime if Lambda < lambda_min.
void validate(const HierarchyParams& p);

/// lambda(t) = 1 / (Lambda (1 + t)).
double lambda_schedule(double Lambda, double t);

/// Smallest admissible Lambda:
/// max(q/(q-1) sigma^2, q (1 + 2 ((q-2) q - 1)^2 / (q sigma^2))).
double lambda_min(double q, double sigma);

/// (q - 2) + q d / (2 q*), 1/q + 1/q* = 1.
double default_theta(double q, int d);

/// L = C lambda(1)^(-theta) ||K||_p^q.
double growth_constant(const HierarchyParams& p);

/// min(1, 1 / (4 L max(F0, F))); 1 when L = 0.
double existence_time(double L, double F0, double F);

/// Samples of X_{m+1} on a grid s_0 = 0 < ... < s_J = t.
struct TailSamples {
  std::vector<double> times;
  std::vector<double> values;
};

/// Right side of the iterated recursion
///   sum_{l=k}^{m} F0^l L^(l-k) t^(l-k) C(l-1, k-1)
///   + L^(m+1-k) m! / ((k-1)! (m-k)!) int_0^t X_{m+1}(s) (t-s)^(m-k) ds,
/// with log-space coefficients and the trapezoidal rule on the tail grid.
/// An empty tail means X_{m+1} = 0. Throws Overflow naming the term index.
double induction_bound(int k, int m, double t, double F0, double L, const TailSamples& tail = {});

/// 2^k F0^k + F^k 2^(2k - N - 1). Throws OutOfRegime unless
/// 4 L t max(F0, F) < 1.
double final_marginal_bound(int k, int N, double F0, double F, double L, double t);

/// 2^k M^k (2 L M t)^(m + 1 - k).
double uniqueness_decay(int k, int m, double t, double L_tilde, double M_tilde);

/// X_k(t_j) for k = k_min .. k_min + values.size() - 1.
struct RecursionTrace {
  std::vector<double> times;
  int k_min = 1;
  std::vector<std::vector<double>> values;
  double L_used = 0.0;
};

void to_json(Json& j, const RecursionTrace& t);
void from_json(const Json& j, RecursionTrace& t);

struct RecursionCheck {
  int k = 0;
  double t = 0.0;
  double lhs = 0.0;  // X_k(t)
  double rhs = 0.0;  // X_k(0) + k L int_0^t X_{k+1}
  double tolerance = 0.0;
  double margin = 0.0;  // rhs + tolerance - lhs
  bool holds = true;
};

struct RecursionReport {
  std::vector<RecursionCheck> checks;
  bool all_hold = true;
  double worst_margin = 0.0;
};

void to_json(Json& j, const RecursionReport& r);

/// Checks X_k(t) <= X_k(0) + k L int_0^t X_{k+1} at every grid time for
/// k = k_min .. k_max - 1. The tolerance is rel_tol * rhs plus k L times an
/// estimate of the trapezoidal error (difference against the rule on every
/// other node). Violations are reported, not thrown.
RecursionReport verify_recursion(const RecursionTrace& trace, double rel_tol = 1e-6);

/// Summary used by the `bounds` command: lambda samples, Lambda_min, L, T*,
/// and bound tables over k = 1..N at t = T*/2 (induction bound with
/// m = N - 1 and X_N = F^N).
Json bounds_report(const HierarchyParams& p);

}  // namespace meanfield
