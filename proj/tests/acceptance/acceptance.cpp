// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset by number (default: all ten).

#include <chrono>
#include <fstream>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "app.hpp"
#include "meanfield/ensemble.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/hierarchy.hpp"
#include "meanfield/marginals.hpp"
#include "meanfield/particles.hpp"
#include "meanfield/vlasov.hpp"

using namespace meanfield;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

KernelSpec family_spec(KernelFamily f, int d) {
  KernelSpec s;
  s.family = f;
  s.dim = d;
  s.strength = 1.0;
  s.power = 0.5;
  if (f == KernelFamily::kSmoothFourier) {
    FourierMode m;
    m.wavevector[0] = 1;
    m.amplitude = 1.0;
    s.modes.push_back(m);
    if (d >= 2) {
      FourierMode m2;
      m2.wavevector[0] = 1;
      m2.wavevector[1] = -1;
      m2.amplitude = 0.5;
      s.modes.push_back(m2);
    }
  }
  return s;
}

// 1. force against central differences of the potential
Outcome kernel_consistency() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double h = 1e-5, r_min = 0.1;
  double worst = 0.0;
  std::string where;
  for (auto fam : {KernelFamily::kCoulomb, KernelFamily::kMildPower, KernelFamily::kSmoothFourier,
                   KernelFamily::kZero})
    for (int d = 1; d <= 3; ++d) {
      const Kernel k(family_spec(fam, d));
      for (int n = 0; n < 1000;) {
        double r[3] = {0, 0, 0}, r2 = 0.0;
        for (int c = 0; c < d; ++c) r2 += (r[c] = u(rng)) * r[c];
        if (r2 < r_min * r_min) continue;
        ++n;
        const auto f = k.force(std::span<const double>(r, size_t(d)));
        double err2 = 0.0;
        for (int c = 0; c < d; ++c) {
          double p[3] = {r[0], r[1], r[2]}, m[3] = {r[0], r[1], r[2]};
          p[c] += h;
          m[c] -= h;
          const double g = (k.potential(std::span<const double>(p, size_t(d))) -
                            k.potential(std::span<const double>(m, size_t(d)))) /
                           (2 * h);
          err2 += (f[size_t(c)] + g) * (f[size_t(c)] + g);
        }
        if (std::sqrt(err2) > worst) {
          worst = std::sqrt(err2);
          where = to_string(fam) + " d=" + std::to_string(d);
        }
      }
    }
  return {worst <= 1e-6, "worst |K + grad_FD phi| = " + fmt(worst) + " (" + where + "), 4 families x 3 dims x 1000 points"};
}

SimConfig smooth_config(int N, int d, double sigma, double dt, double t_end, uint64_t seed) {
  SimConfig c;
  c.N = N;
  c.d = d;
  c.sigma = sigma;
  c.dt = dt;
  c.t_end = t_end;
  c.seed = seed;
  c.kernel = family_spec(KernelFamily::kSmoothFourier, d);
  return c;
}

// 2. noiseless energy drift is first order, momentum is conserved
Outcome liouville_surrogate() {
  double drift[2], mom = 0.0;
  const double dts[2] = {1e-3, 5e-4};
  for (int i = 0; i < 2; ++i) {
    auto cfg = smooth_config(64, 2, 0.0, dts[i], 1.0, 5);
    const Kernel k(cfg.kernel);
    InitialLaw law;
    auto s = sample_initial_state(cfg, law, cfg.seed);
    const double e0 = energy_report(s, k).total;
    const auto p0 = total_momentum(s);
    simulate(s, cfg, k, nullptr);
    drift[i] = std::abs(energy_report(s, k).total - e0);
    const auto p1 = total_momentum(s);
    for (int c = 0; c < 2; ++c) mom = std::max(mom, std::abs(p1[size_t(c)] - p0[size_t(c)]));
  }
  const double ratio = drift[0] / drift[1];
  return {ratio >= 1.6 && ratio <= 2.4 && mom <= 1e-10,
          "energy drift " + fmt(drift[0]) + " -> " + fmt(drift[1]) + ", ratio " + fmt(ratio) +
              " (need 2 +/- 20%), momentum drift " + fmt(mom)};
}

// 3. energy slope N d sigma^2
Outcome energy_slope() {
  auto cfg = smooth_config(32, 2, 0.5, 1e-3, 0.5, 2024);
  cfg.snapshot_stride = 50;
  const int R = 2000;
  const auto ds = run_ensemble(cfg, R, InitialLaw{});
  const Kernel k(cfg.kernel);
  const auto& ts = ds.snapshot_times;
  double tb = 0.0;
  for (double t : ts) tb += t;
  tb /= double(ts.size());
  double sxx = 0.0;
  for (double t : ts) sxx += (t - tb) * (t - tb);
  // the least-squares slope is linear in the data, so the slope of the
  // ensemble mean is the mean of per-replica slopes
  std::vector<double> slopes;
  for (int r = 0; r < R; ++r) {
    double sxy = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
      ParticleState st;
      st.d = cfg.d;
      st.positions = ds.snapshots[size_t(r)][i].positions;
      st.velocities = ds.snapshots[size_t(r)][i].velocities;
      sxy += (ts[i] - tb) * energy_report(st, k).total;
    }
    slopes.push_back(sxy / sxx);
  }
  double mean = 0.0, var = 0.0;
  for (double s : slopes) mean += s;
  mean /= R;
  for (double s : slopes) var += (s - mean) * (s - mean);
  const double se = std::sqrt(var / (R - 1) / R);
  const double expected = expected_energy_slope(cfg);
  return {std::abs(mean - expected) <= 3 * se,
          "fitted slope " + fmt(mean) + " +/- " + fmt(se) + ", expected " + fmt(expected) + " (" +
              fmt(std::abs(mean - expected) / se) + " standard errors)"};
}

// 4. collision floor for 2-D Coulomb
Outcome collision_floor() {
  SimConfig cfg;
  cfg.N = 128;
  cfg.d = 2;
  cfg.sigma = 0.5;
  cfg.dt = 1e-3;
  cfg.t_end = 0.5;
  cfg.seed = 40;
  cfg.snapshot_stride = 10;
  cfg.kernel = family_spec(KernelFamily::kCoulomb, 2);
  const Kernel k(cfg.kernel);
  int aborts = 0, violations = 0, checked = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int r = 0; r < 20; ++r) {
    try {
      const auto ds = run_ensemble([&] {
        auto c = cfg;
        c.seed = cfg.seed + uint64_t(r);
        return c;
      }(), 1, InitialLaw{});
      for (const auto& snap : ds.snapshots[0]) {
        ParticleState st;
        st.d = 2;
        st.positions = snap.positions;
        st.velocities = snap.velocities;
        const auto e = energy_report(st, k);
        const double margin = std::log(e.min_pair_dist) - e.log_collision_floor;
        worst_margin = std::min(worst_margin, margin);
        ++checked;
        if (!(margin > 0.0)) ++violations;
      }
    } catch (const NumericalError&) {
      ++aborts;
    }
  }
  return {aborts == 0 && violations == 0,
          std::to_string(aborts) + " aborts, " + std::to_string(violations) + " floor violations over " +
              std::to_string(checked) + " snapshots; smallest log(min_pair) + N E = " + fmt(worst_margin)};
}

// 5. Hoelder inequality on random grids
Outcome holder() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int d = 1 + t % 2;
    GridSpec g{2, d, 4 + int(u(rng) * 5), (t % 3 == 0) ? 0 : 4 + int(u(rng) * 3), 0.5 + 2.0 * u(rng)};
    GridDensity f;
    f.spec = g;
    f.values.resize(g.total_cells());
    for (double& v : f.values) v = std::pow(u(rng), 3);
    std::vector<double> kg;
    if (t % 4 == 0) {
      kg = kernel_magnitude_grid(Kernel(family_spec(t % 8 == 0 ? KernelFamily::kCoulomb : KernelFamily::kMildPower, d)),
                                 g.x_bins);
    } else {
      kg.resize(size_t(std::pow(g.x_bins, d)));
      for (double& v : kg) v = 3.0 * u(rng);
    }
    const auto rep = holder_check(kg, f, 1.5, 3.0);
    if (!(rep.lhs <= rep.rhs * (1 + 1e-9))) ++violations;
    if (rep.rhs > 0.0) worst = std::max(worst, rep.lhs / rep.rhs);
  }
  return {violations == 0, std::to_string(violations) + " violations in 500 pairs, largest lhs/rhs = " + fmt(worst)};
}

// Picard iteration of X_k(t) = F0^k + k L int_0^t X_{k+1}, k = 1..top-1, with
// X_top = c constant, carried out on exact polynomial coefficients.
std::vector<double> picard_polynomial(int top, double F0, double L, double c, double t) {
  using Poly = std::vector<double>;
  std::vector<Poly> X(size_t(top + 1), Poly{0.0});
  X[size_t(top)] = Poly{c};
  for (int sweep = 0; sweep <= top + 1; ++sweep) {
    bool changed = false;
    std::vector<Poly> next = X;
    for (int k = 1; k < top; ++k) {
      const Poly& up = X[size_t(k + 1)];
      Poly p(up.size() + 1, 0.0);
      p[0] = std::pow(F0, k);
      for (size_t i = 0; i < up.size(); ++i) p[i + 1] = k * L * up[i] / double(i + 1);
      if (p != X[size_t(k)]) changed = true;
      next[size_t(k)] = p;
    }
    X = next;
    if (!changed) break;
  }
  std::vector<double> values(size_t(top), 0.0);
  for (int k = 1; k < top; ++k) {
    double v = 0.0;
    const auto& p = X[size_t(k)];
    for (size_t i = p.size(); i-- > 0;) v = v * t + p[i];
    values[size_t(k)] = v;
  }
  return values;
}

// 6. hierarchy closed forms
Outcome hierarchy() {
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int exceed = 0, checks = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const int N = 2 + int(u(rng) * 19);
    const int m = 1 + int(u(rng) * (N - 1));
    const double F0 = 0.2 + 2.0 * u(rng), F = 0.2 + 2.0 * u(rng), L = 0.05 + 2.0 * u(rng);
    const double t = (0.01 + 0.98 * u(rng)) * existence_time(L, F0, F);
    const auto x = picard_polynomial(m + 1, F0, L, std::pow(F, m + 1), t);
    TailSamples tail;
    for (int j = 0; j <= 4000; ++j) {
      tail.times.push_back(t * j / 4000);
      tail.values.push_back(std::pow(F, m + 1));
    }
    for (int k = 1; k <= m; ++k) {
      const double b = induction_bound(k, m, t, F0, L, tail);
      worst = std::max(worst, x[size_t(k)] / b - 1.0);
      ++checks;
      if (!(x[size_t(k)] <= b * (1 + 1e-6))) ++exceed;
    }
    const auto y = picard_polynomial(N, F0, L, std::pow(F, N), t);
    for (int k = 1; k < N; ++k) {
      const double b = final_marginal_bound(k, N, F0, F, L, t);
      worst = std::max(worst, y[size_t(k)] / b - 1.0);
      ++checks;
      if (!(y[size_t(k)] <= b * (1 + 1e-6))) ++exceed;
    }
  }
  // binomial bound by Pascal's triangle in exact integers
  bool binomial = true;
  std::vector<unsigned long long> row{1};
  for (int l = 1; l <= 60; ++l) {
    for (size_t k = 0; k < row.size(); ++k) binomial = binomial && row[k] <= (1ULL << (l - 1));
    std::vector<unsigned long long> nrow(row.size() + 1, 0);
    for (size_t k = 0; k < row.size(); ++k) nrow[k] += row[k], nrow[k + 1] += row[k];
    row = nrow;
  }
  bool tstar = existence_time(1.0, 1.0, 1.0) == 0.25;
  std::mt19937_64 rng2(67);
  for (int i = 0; i < 100; ++i) {
    const double L = 0.01 + 3 * u(rng2), F0 = 0.1 + 3 * u(rng2), F = 0.1 + 3 * u(rng2);
    const double want = std::min(1.0, 1.0 / (4 * L * std::max(F0, F)));
    tstar = tstar && std::abs(existence_time(L, F0, F) - want) <= 1e-15 * want;
  }
  return {exceed == 0 && binomial && tstar,
          std::to_string(exceed) + " of " + std::to_string(checks) + " Picard values exceed a bound (largest x/b - 1 = " +
              fmt(worst) + "); binomial " + (binomial ? "ok" : "FAILED") + "; T* " + (tstar ? "ok, 0.25 at L=F0=F=1" : "FAILED")};
}

Kernel zero_kernel(int d) {
  KernelSpec s;
  s.family = KernelFamily::kZero;
  s.dim = d;
  return Kernel(s);
}

// 7. PDE analytic checks
Outcome pde_checks() {
  std::ostringstream msg;
  bool ok = true;
  {
    const int n = 128;
    const double s = 1.0, v_max = 6.0, eps = 0.5, t = 0.5, dt = 1.0 / 800;
    const auto f0 = landau_initial(n, n, v_max, s, eps, 1);
    double m0 = 0.0;
    for (int j = 0; j < n; ++j) m0 += std::exp(-f0.v_center(j) * f0.v_center(j) / 2.0);
    for (auto xt : {XTransport::kSpectral, XTransport::kCubicSpline}) {
      VpfpOptions opt;
      opt.x_transport = xt;
      SolverReport rep;
      const auto f = solve_vpfp_1d(f0, zero_kernel(1), 0.0, t, dt, &rep, opt);
      double err = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double x = f0.x_center(i), v = f0.v_center(j);
          const double exact = (1.0 + eps * std::cos(2 * kPi * (x - v * t))) * std::exp(-v * v / 2.0) / (m0 * f0.dv());
          err += std::abs(f.f[size_t(i) * n + size_t(j)] - exact);
        }
      err *= f0.dx() * f0.dv();
      ok = ok && err <= 1e-6 && rep.mass_drift_per_time <= 1e-10;
      msg << (xt == XTransport::kSpectral ? "transport L1 " : ", spline transport L1 ") << fmt(err);
    }
  }
  {
    const double s = 1.0, sigma = 0.8, t = 0.5;
    SolverReport rep;
    const auto f = solve_vpfp_1d(landau_initial(8, 256, 10.0, s, 0.0, 1), zero_kernel(1), sigma, t, 0.01, &rep);
    double m = 0.0, var = 0.0;
    for (int i = 0; i < f.nx; ++i)
      for (int j = 0; j < f.nv; ++j) {
        const double v = f.v_center(j), w = f.f[size_t(i) * f.nv + size_t(j)];
        m += w;
        var += w * v * v;
      }
    const double growth = var / m - s * s;
    const double rel = std::abs(growth - sigma * sigma * t) / (sigma * sigma * t);
    ok = ok && rel <= 0.005 && rep.mass_drift_per_time <= 1e-10;
    msg << ", variance growth rel err " << fmt(rel);
  }
  {
    KernelSpec ks = family_spec(KernelFamily::kSmoothFourier, 1);
    SolverReport rep;
    solve_vpfp_1d(landau_initial(64, 128, 6.0, 1.0, 0.5, 1), Kernel(ks), 1.0, 1.0, 1.0 / 400, &rep);
    ok = ok && rep.mass_drift_per_time <= 1e-10;
    msg << ", interacting mass drift/time " << fmt(rep.mass_drift_per_time);
  }
  {
    double worst = 0.0, drift = 0.0;
    for (int d : {1, 2}) {
      const double sigma = 0.7, eps = 0.4, t = 0.3;
      const int m = 2;
      SolverReport rep;
      const auto f = solve_first_order(cosine_initial(32, d, eps, m), zero_kernel(d), sigma, t, 0.01, &rep);
      const double decay = std::exp(-0.5 * sigma * sigma * 4 * kPi * kPi * m * m * t);
      const size_t inner = f.size() / size_t(f.n);
      for (size_t c = 0; c < f.f.size(); ++c) {
        const double x = (double(c / inner) + 0.5) / f.n;
        worst = std::max(worst, std::abs(f.f[c] - (1.0 + eps * decay * std::cos(2 * kPi * m * x))));
      }
      drift = std::max(drift, rep.mass_drift_per_time);
    }
    ok = ok && worst <= 1e-8 && drift <= 1e-10;
    msg << ", mode decay err " << fmt(worst);
  }
  return {ok, msg.str()};
}

// 8 and 9 share one sweep
Json chaos_sweep;

Outcome chaos_d1() {
  chaos_sweep = app::run_compare(app::preset("chaos_d1").at("compare"), {});
  std::ostringstream msg;
  msg << "L1 k=1:";
  for (const auto& r : chaos_sweep.at("rows")) msg << " " << fmt(r.at("l1_k1").get<double>());
  msg << "; L1 k=2:";
  for (const auto& r : chaos_sweep.at("rows")) msg << " " << fmt(r.at("l1_k2").get<double>());
  msg << " (N = 64, 256, 1024)";
  return {chaos_sweep.at("l1_k1_decreasing").get<bool>() && chaos_sweep.at("l1_k2_decreasing").get<bool>(), msg.str()};
}

Outcome weighted_norm() {
  if (chaos_sweep.is_null()) chaos_sweep = app::run_compare(app::preset("chaos_d1").at("compare"), {});
  const double ratio = chaos_sweep.at("weighted_norm_ratio").get<double>();
  bool recursion = true;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& r : chaos_sweep.at("rows")) {
    recursion = recursion && r.at("recursion").at("all_hold").get<bool>();
    worst = std::min(worst, r.at("recursion").at("worst_margin").get<double>());
  }
  return {ratio <= 2.0 && recursion, "weighted norm max/min across N = " + fmt(ratio) + ", recursion at 10% " +
                                         (recursion ? "holds" : "FAILS") + " (worst margin " + fmt(worst) +
                                         ", L = " + fmt(chaos_sweep.at("L").get<double>()) + ")"};
}

// 10. 2-D Coulomb self-convergence
Outcome coulomb_self() {
  const auto res = app::run_compare(app::preset("coulomb_d2").at("compare"), {});
  std::ostringstream msg;
  msg << "L1(N, 2N):";
  for (const auto& r : res.at("rows")) msg << " " << fmt(r.at("l1_k1").get<double>());
  msg << " (N = 128, 256, 512)";
  return {res.at("l1_k1_decreasing").get<bool>(), msg.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"kernel consistency", kernel_consistency},
      {"noiseless energy drift and momentum", liouville_surrogate},
      {"Ito energy slope", energy_slope},
      {"Coulomb collision floor", collision_floor},
      {"Hoelder inequality", holder},
      {"hierarchy closed forms", hierarchy},
      {"PDE analytic checks", pde_checks},
      {"propagation of chaos d=1", chaos_d1},
      {"weighted-norm boundedness", weighted_norm},
      {"2-D Coulomb self-convergence", coulomb_self},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  // lines are also kept in a file, since ctest hides output of passing tests
  std::ofstream log("acceptance_results.txt");
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::ostringstream line;
    line << (o.pass ? "PASS " : "FAIL ") << id << " " << criteria[i].first << ": " << o.detail << " [" << fmt(secs)
         << " s]";
    std::cout << line.str() << std::endl;
    log << line.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
