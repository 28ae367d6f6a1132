#include "meanfield/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meanfield/errors.hpp"

namespace meanfield {

namespace {

const double kLogMax = std::log(std::numeric_limits<double>::max());

// n * log(x) with the convention 0 * log(0) = 0.
double log_pow(double x, int n) { return n == 0 ? 0.0 : n * std::log(x); }

double log_factorial(int n) { return std::lgamma(double(n) + 1.0); }

double checked_exp(double log_value, const std::string& what) {
  if (log_value > kLogMax) throw Overflow(what + " exceeds the double range");
  return std::exp(log_value);
}

double trapezoid_on(const std::vector<double>& x, const std::vector<double>& y, size_t upto, size_t stride = 1) {
  double s = 0.0;
  for (size_t i = stride; i <= upto; i += stride) s += 0.5 * (x[i] - x[i - stride]) * (y[i] + y[i - stride]);
  return s;
}

}  // namespace

double HierarchyParams::effective_Lambda() const { return Lambda > 0.0 ? Lambda : lambda_min(q, sigma); }
double HierarchyParams::effective_theta() const { return theta_exp > 0.0 ? theta_exp : default_theta(q, d); }

void to_json(Json& j, const HierarchyParams& p) {
  j = Json{{"q", p.q},           {"p", p.p},          {"d", p.d},
           {"sigma", p.sigma},   {"Lambda", p.Lambda}, {"C_const", p.C_const},
           {"theta_exp", p.theta_exp}, {"K_lp_norm", p.K_lp_norm}, {"F0", p.F0},
           {"F", p.F},           {"N", p.N}};
  if (p.L_override >= 0.0) j["L"] = p.L_override;
}

void from_json(const Json& j, HierarchyParams& p) {
  HierarchyParams d;
  p.q = j.value("q", d.q);
  p.p = j.value("p", d.p);
  p.d = j.value("d", d.d);
  p.sigma = j.value("sigma", d.sigma);
  p.Lambda = j.value("Lambda", d.Lambda);
  p.C_const = j.value("C_const", d.C_const);
  p.theta_exp = j.value("theta_exp", d.theta_exp);
  p.K_lp_norm = j.value("K_lp_norm", d.K_lp_norm);
  p.F0 = j.value("F0", d.F0);
  p.F = j.value("F", d.F);
  p.N = j.value("N", d.N);
  p.L_override = j.value("L", d.L_override);
}

void validate(const HierarchyParams& p) {
  if (!(p.q >= 2.0) || !std::isfinite(p.q)) throw ConfigError("q must be at least 2");
  if (!(p.p > 1.0)) throw ConfigError("p must exceed 1");
  if (1.0 / p.p + 1.0 / p.q > 1.0 + 1e-12) throw ExponentViolation("1/p + 1/q must not exceed 1");
  if (p.d < 1 || p.d > 3) throw ConfigError("d must be 1, 2 or 3");
  if (!(p.sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (p.Lambda < 0.0) throw ConfigError("Lambda must be positive (0 selects the minimum)");
  if (!(p.C_const > 0.0)) throw ConfigError("C_const must be positive");
  if (p.theta_exp < 0.0) throw ConfigError("theta_exp must be positive (0 selects the default)");
  if (!(p.K_lp_norm >= 0.0)) throw ConfigError("K_lp_norm must be nonnegative");
  if (!(p.F0 > 0.0) || !(p.F > 0.0)) throw ConfigError("F0 and F must be positive");
  if (p.N < 1) throw ConfigError("N must be positive");
  if (p.effective_Lambda() < lambda_min(p.q, p.sigma) * (1.0 - 1e-12))
    throw OutOfRegime("Lambda is below lambda_min(q, sigma) = " + format_double(lambda_min(p.q, p.sigma)));
}

double lambda_schedule(double Lambda, double t) {
  if (!(Lambda > 0.0) || !(t >= 0.0)) throw ConfigError("lambda schedule needs Lambda > 0 and t >= 0");
  return 1.0 / (Lambda * (1.0 + t));
}

double lambda_min(double q, double sigma) {
  if (!(q >= 2.0) || !(sigma > 0.0)) throw ConfigError("lambda_min needs q >= 2 and sigma > 0");
  const double s2 = sigma * sigma;
  const double first = q / (q - 1.0) * s2;
  const double c = (q - 2.0) * q - 1.0;
  const double second = q * (1.0 + 2.0 * c * c / (q * s2));
  return std::max(first, second);
}

double default_theta(double q, int d) {
  if (!(q >= 2.0)) throw ConfigError("q must be at least 2");
  const double q_star = q / (q - 1.0);
  return (q - 2.0) + q * d / (2.0 * q_star);
}

double growth_constant(const HierarchyParams& p) {
  validate(p);
  if (p.K_lp_norm == 0.0) return 0.0;
  const double lam1 = lambda_schedule(p.effective_Lambda(), 1.0);
  return p.C_const * std::pow(lam1, -p.effective_theta()) * std::pow(p.K_lp_norm, p.q);
}

double existence_time(double L, double F0, double F) {
  if (!(L >= 0.0) || !(F0 > 0.0) || !(F > 0.0)) throw ConfigError("existence_time needs L >= 0 and F0, F > 0");
  if (L == 0.0) return 1.0;
  return std::min(1.0, 1.0 / (4.0 * L * std::max(F0, F)));
}

double induction_bound(int k, int m, double t, double F0, double L, const TailSamples& tail) {
  if (k < 1 || m < k) throw ConfigError("induction_bound needs 1 <= k <= m");
  if (!(t >= 0.0) || !(F0 >= 0.0) || !(L >= 0.0)) throw ConfigError("induction_bound needs t, F0, L >= 0");
  double sum = 0.0;
  for (int l = k; l <= m; ++l) {
    if (F0 == 0.0) break;
    const double log_binom = log_factorial(l - 1) - log_factorial(k - 1) - log_factorial(l - k);
    const double lt = log_pow(F0, l) + log_pow(L, l - k) + log_pow(t, l - k) + log_binom;
    sum += checked_exp(lt, "induction term l = " + std::to_string(l));
  }
  if (!tail.times.empty()) {
    const auto& s = tail.times;
    const auto& x = tail.values;
    if (s.size() != x.size() || s.size() < 2) throw ConfigError("tail samples need at least two matching points");
    if (std::abs(s.front()) > 1e-12 || std::abs(s.back() - t) > 1e-12 * std::max(1.0, t))
      throw ConfigError("tail samples must span [0, t]");
    std::vector<double> integrand(s.size());
    for (size_t i = 0; i < s.size(); ++i) integrand[i] = x[i] * std::pow(std::max(t - s[i], 0.0), m - k);
    const double integral = trapezoid_on(s, integrand, s.size() - 1);
    if (integral > 0.0) {
      const double log_coeff = log_pow(L, m + 1 - k) + log_factorial(m) - log_factorial(k - 1) - log_factorial(m - k);
      sum += checked_exp(log_coeff + std::log(integral), "tail term l = " + std::to_string(m + 1));
    }
  }
  if (!std::isfinite(sum)) throw Overflow("induction bound sum exceeds the double range");
  return sum;
}

double final_marginal_bound(int k, int N, double F0, double F, double L, double t) {
  if (k < 1 || k > N) throw ConfigError("final_marginal_bound needs 1 <= k <= N");
  if (!(F0 > 0.0) || !(F > 0.0) || !(L >= 0.0) || !(t >= 0.0)) throw ConfigError("invalid bound parameters");
  if (!(4.0 * L * t * std::max(F0, F) < 1.0))
    throw OutOfRegime("4 L t max(F0, F) = " + format_double(4.0 * L * t * std::max(F0, F)) + " is not below 1");
  const double ln2 = std::log(2.0);
  const double a = k * ln2 + k * std::log(F0);
  const double b = k * std::log(F) + (2.0 * k - N - 1.0) * ln2;
  return checked_exp(a, "2^k F0^k") + checked_exp(b, "F^k 2^(2k-N-1)");
}

double uniqueness_decay(int k, int m, double t, double L_tilde, double M_tilde) {
  if (k < 1 || m < k) throw ConfigError("uniqueness_decay needs 1 <= k <= m");
  if (!(t >= 0.0) || !(L_tilde >= 0.0) || !(M_tilde > 0.0)) throw ConfigError("invalid decay parameters");
  const double base = 2.0 * L_tilde * M_tilde * t;
  if (base == 0.0) return 0.0;
  return checked_exp(k * std::log(2.0 * M_tilde) + (m + 1 - k) * std::log(base), "uniqueness decay");
}

void to_json(Json& j, const RecursionTrace& t) {
  j = Json{{"times", t.times}, {"k_min", t.k_min}, {"values", t.values}, {"L_used", t.L_used}};
}

void from_json(const Json& j, RecursionTrace& t) {
  t.times = j.at("times").get<std::vector<double>>();
  t.k_min = j.value("k_min", 1);
  t.values = j.at("values").get<std::vector<std::vector<double>>>();
  t.L_used = j.at("L_used").get<double>();
}

void to_json(Json& j, const RecursionReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"k", c.k},
                      {"t", c.t},
                      {"lhs", c.lhs},
                      {"rhs", c.rhs},
                      {"tolerance", c.tolerance},
                      {"margin", c.margin},
                      {"holds", c.holds}});
  j = Json{{"all_hold", r.all_hold}, {"worst_margin", r.worst_margin}, {"checks", checks}};
}

RecursionReport verify_recursion(const RecursionTrace& trace, double rel_tol) {
  const size_t J = trace.times.size();
  if (trace.values.size() < 2) throw ConfigError("a recursion trace needs at least two levels");
  if (J < 1) throw ConfigError("a recursion trace needs at least one time");
  for (size_t i = 1; i < J; ++i)
    if (!(trace.times[i] > trace.times[i - 1])) throw ConfigError("trace times must increase");
  for (const auto& row : trace.values) {
    if (row.size() != J) throw ConfigError("trace rows must match the time grid");
    for (double v : row)
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("trace values must be nonnegative and finite");
  }
  RecursionReport rep;
  bool first = true;
  for (size_t level = 0; level + 1 < trace.values.size(); ++level) {
    const int k = trace.k_min + int(level);
    const auto& xk = trace.values[level];
    const auto& next = trace.values[level + 1];
    for (size_t j = 0; j < J; ++j) {
      const double integral = trapezoid_on(trace.times, next, j);
      // Richardson-style estimate: full rule against the rule on every other node
      const size_t even = j - j % 2;
      const double quad_err = even >= 2 ? std::abs(trapezoid_on(trace.times, next, even) -
                                                   trapezoid_on(trace.times, next, even, 2))
                                        : 0.0;
      RecursionCheck c;
      c.k = k;
      c.t = trace.times[j];
      c.lhs = xk[j];
      c.rhs = xk[0] + k * trace.L_used * integral;
      c.tolerance = rel_tol * std::abs(c.rhs) + k * trace.L_used * quad_err;
      c.margin = c.rhs + c.tolerance - c.lhs;
      c.holds = c.margin >= 0.0;
      rep.all_hold = rep.all_hold && c.holds;
      if (first || c.margin < rep.worst_margin) rep.worst_margin = c.margin;
      first = false;
      rep.checks.push_back(c);
    }
  }
  return rep;
}

Json bounds_report(const HierarchyParams& p) {
  validate(p);
  const double Lambda = p.effective_Lambda();
  Json lambdas = Json::array();
  for (int i = 0; i <= 4; ++i) {
    const double t = 0.25 * i;
    lambdas.push_back({{"t", t}, {"lambda", lambda_schedule(Lambda, t)}});
  }
  const double L = p.L_override >= 0.0 ? p.L_override : growth_constant(p);
  const double T = existence_time(L, p.F0, p.F);
  const double t_eval = 0.5 * T;
  Json table = Json::array();
  for (int k = 1; k <= p.N; ++k) {
    Json row = {{"k", k}, {"final_marginal_bound", final_marginal_bound(k, p.N, p.F0, p.F, L, t_eval)}};
    if (k <= p.N - 1) {
      TailSamples tail;
      const int J = 64;
      for (int i = 0; i <= J; ++i) {
        tail.times.push_back(t_eval * i / J);
        tail.values.push_back(std::pow(p.F, p.N));
      }
      if (t_eval == 0.0) tail = {};
      row["induction_bound"] = induction_bound(k, p.N - 1, t_eval, p.F0, L, tail);
    }
    table.push_back(row);
  }
  return Json{{"params", p},
              {"Lambda", Lambda},
              {"Lambda_min", lambda_min(p.q, p.sigma)},
              {"theta", p.effective_theta()},
              {"lambda_schedule", lambdas},
              {"L", L},
              {"T_star", T},
              {"t_eval", t_eval},
              {"bounds", table}};
}

}  // namespace meanfield
