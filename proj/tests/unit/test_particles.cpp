#include <doctest.h>

#include <cmath>
#include <limits>
#include <omp.h>

#include "meanfield/ensemble.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/particles.hpp"

using namespace meanfield;

namespace {

KernelSpec smooth_kernel(int d) {
  KernelSpec s;
  s.family = KernelFamily::kSmoothFourier;
  s.dim = d;
  FourierMode m;
  m.wavevector[0] = 1;
  m.amplitude = 1.0;
  s.modes.push_back(m);
  if (d >= 2) {
    FourierMode m2;
    m2.wavevector[1] = 1;
    m2.amplitude = 0.5;
    s.modes.push_back(m2);
  }
  return s;
}

KernelSpec coulomb_kernel(int d) {
  KernelSpec s;
  s.family = KernelFamily::kCoulomb;
  s.dim = d;
  return s;
}

KernelSpec zero_kernel(int d) {
  KernelSpec s;
  s.family = KernelFamily::kZero;
  s.dim = d;
  return s;
}

SimConfig make_config(int N, int d, double sigma, double dt, double t_end, KernelSpec k, uint64_t seed = 1) {
  SimConfig c;
  c.N = N;
  c.d = d;
  c.sigma = sigma;
  c.dt = dt;
  c.t_end = t_end;
  c.kernel = std::move(k);
  c.seed = seed;
  return c;
}

double energy_at_end(const SimConfig& cfg, double& e0) {
  const Kernel k(cfg.kernel);
  InitialLaw law;
  ParticleState s = sample_initial_state(cfg, law, cfg.seed);
  e0 = energy_report(s, k).total;
  simulate(s, cfg, k, nullptr);
  return energy_report(s, k).total;
}

}  // namespace

TEST_CASE("a single particle feels no force") {
  ParticleState s;
  s.d = 2;
  s.positions = {0.3, 0.4};
  const auto f = compute_forces(s, coulomb_kernel(2));
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 0.0);
}

TEST_CASE("forces match a naive double loop and sum to zero") {
  for (auto spec : {coulomb_kernel(2), smooth_kernel(2), coulomb_kernel(3)}) {
    auto cfg = make_config(64, spec.dim, 0.0, 1e-3, 1.0, spec);
    InitialLaw law;
    const auto s = sample_initial_state(cfg, law, 5);
    const Kernel k(spec);
    const auto f = compute_forces(s, k);
    const int d = spec.dim;
    std::array<double, 3> total{};
    for (int i = 0; i < 64; ++i) {
      std::array<double, 3> ref{};
      for (int j = 0; j < 64; ++j) {
        if (i == j) continue;
        std::array<double, 3> r{};
        for (int c = 0; c < d; ++c) r[c] = s.positions[i * d + c] - s.positions[j * d + c];
        const auto kij = k.force(std::span<const double>(r.data(), d));
        for (int c = 0; c < d; ++c) ref[c] += kij[c] / 64.0;
      }
      for (int c = 0; c < d; ++c) {
        CHECK(f[i * d + c] == doctest::Approx(ref[c]).epsilon(1e-13).scale(1e-13));
        total[c] += f[i * d + c];
      }
    }
    for (int c = 0; c < d; ++c) CHECK(std::abs(total[c]) <= 1e-12 * 64);
  }
}

TEST_CASE("results do not depend on the thread count") {
  auto cfg = make_config(50, 2, 0.7, 1e-3, 0.02, coulomb_kernel(2), 9);
  const Kernel k(cfg.kernel);
  InitialLaw law;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = sample_initial_state(cfg, law, 9);
  simulate(a, cfg, k, nullptr);
  omp_set_num_threads(4);
  auto b = sample_initial_state(cfg, law, 9);
  simulate(b, cfg, k, nullptr);
  omp_set_num_threads(saved);
  CHECK(a == b);
}

TEST_CASE("free transport") {
  auto cfg = make_config(1, 2, 0.0, 0.01, 0.5, zero_kernel(2));
  ParticleState s;
  s.d = 2;
  s.positions = {0.8, 0.1};
  s.velocities = {1.0, 0.0};
  simulate(s, cfg, Kernel(cfg.kernel), nullptr);
  CHECK(s.positions[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(s.positions[1] == doctest::Approx(0.1));
  CHECK(s.time == doctest::Approx(0.5));
  CHECK(s.rng.step == 50);
}

TEST_CASE("first-order mode ignores velocities and wraps positions") {
  auto cfg = make_config(16, 2, 0.3, 0.01, 0.2, smooth_kernel(2));
  cfg.order = Order::kFirst;
  InitialLaw law;
  auto s = sample_initial_state(cfg, law, 3);
  CHECK(!s.has_velocities());
  simulate(s, cfg, Kernel(cfg.kernel), nullptr);
  for (double x : s.positions) {
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("momentum is conserved without noise") {
  for (auto spec : {coulomb_kernel(2), smooth_kernel(2), coulomb_kernel(1)}) {
    auto cfg = make_config(24, spec.dim, 0.0, 1e-3, 0.2, spec);
    InitialLaw law;
    auto s = sample_initial_state(cfg, law, 4);
    const auto p0 = total_momentum(s);
    simulate(s, cfg, Kernel(spec), nullptr);
    const auto p1 = total_momentum(s);
    for (int c = 0; c < spec.dim; ++c) CHECK(std::abs(p1[c] - p0[c]) <= 1e-10 * 24 * 200);
  }
}

TEST_CASE("energy drift is first order in dt without noise") {
  double e0 = 0.0;
  auto cfg = make_config(8, 2, 0.0, 1e-2, 1.0, smooth_kernel(2), 21);
  const double drift1 = std::abs(energy_at_end(cfg, e0) - e0);
  cfg.dt = 5e-3;
  const double drift2 = std::abs(energy_at_end(cfg, e0) - e0);
  cfg.dt = 1e-2 / 64;
  const double drift_ref = std::abs(energy_at_end(cfg, e0) - e0);
  CHECK(drift_ref < 0.05 * drift1);
  CHECK(drift1 / drift2 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("energy report") {
  const Kernel kz(zero_kernel(2));
  ParticleState one;
  one.d = 2;
  one.positions = {0.2, 0.2};
  one.velocities = {0.0, 0.0};
  auto r = energy_report(one, kz);
  CHECK(r.kinetic == 1.0);
  CHECK(r.potential == 0.0);
  CHECK(r.total == 1.0);

  ParticleState three;
  three.d = 2;
  three.positions = {0.1, 0.1, 0.5, 0.5, 0.9, 0.2};
  three.velocities = {1.0, 0.0, 0.5, 0.5, 0.0, -2.0};
  r = energy_report(three, kz);
  CHECK(r.total == doctest::Approx(3.0 + 1.0 + 0.5 + 4.0));
  CHECK(r.min_pair_dist == doctest::Approx(std::hypot(0.2, 0.1)));

  const Kernel kc(coulomb_kernel(2));
  ParticleState two;
  two.d = 2;
  two.positions = {0.1, 0.5, 0.35, 0.5};
  two.velocities = {0.0, 0.0, 0.0, 0.0};
  r = energy_report(two, kc);
  const double disp[2] = {0.25, 0.0};
  // (1/N) sum over the ordered pairs (1,2) and (2,1), N = 2
  CHECK(r.potential == doctest::Approx(kc.potential(disp)).epsilon(1e-14));
  CHECK(r.potential >= 0.0);
  CHECK(r.log_collision_floor == doctest::Approx(-2.0 * r.total));
}

TEST_CASE("expected energy slope") {
  auto cfg = make_config(32, 2, 0.5, 1e-3, 1.0, smooth_kernel(2));
  CHECK(expected_energy_slope(cfg) == doctest::Approx(16.0));
  CHECK(energy_slope_per_coordinate(cfg) == doctest::Approx(0.25));
  cfg.sigma = 0.0;
  CHECK(expected_energy_slope(cfg) == 0.0);
  cfg.order = Order::kFirst;
  CHECK_THROWS_AS(expected_energy_slope(cfg), ConfigError);
}

TEST_CASE("energy slope of a single particle by Monte Carlo") {
  auto cfg = make_config(1, 2, 1.0, 0.01, 0.1, zero_kernel(2));
  const Kernel k(cfg.kernel);
  InitialLaw law;
  const int R = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < R; ++r) {
    auto s = sample_initial_state(cfg, law, 1000 + r);
    const double e0 = energy_report(s, k).total;
    simulate(s, cfg, k, nullptr);
    const double de = energy_report(s, k).total - e0;
    sum += de;
    sum2 += de * de;
  }
  const double mean = sum / R;
  const double se = std::sqrt((sum2 / R - mean * mean) / (R - 1));
  CHECK(std::abs(mean - expected_energy_slope(cfg) * 0.1) <= 3 * se);
}

TEST_CASE("identical configs give bit-identical trajectories") {
  auto cfg = make_config(20, 2, 0.5, 1e-3, 0.05, coulomb_kernel(2), 77);
  cfg.snapshot_stride = 10;
  const Kernel k(cfg.kernel);
  InitialLaw law;
  std::vector<Snapshot> a, b;
  auto sa = sample_initial_state(cfg, law, 77);
  simulate(sa, cfg, k, [&](const Snapshot& s, const ParticleState&) { a.push_back(s); });
  auto sb = sample_initial_state(cfg, law, 77);
  simulate(sb, cfg, k, [&](const Snapshot& s, const ParticleState&) { b.push_back(s); });
  CHECK(a.size() == 6);
  CHECK(a == b);
}

TEST_CASE("permuting particle labels permutes the noiseless trajectory") {
  auto cfg = make_config(12, 2, 0.0, 1e-3, 0.1, coulomb_kernel(2));
  const Kernel k(cfg.kernel);
  InitialLaw law;
  auto s = sample_initial_state(cfg, law, 8);
  ParticleState p = s;
  const int n = 12, d = 2;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) {
      p.positions[i * d + c] = s.positions[(n - 1 - i) * d + c];
      p.velocities[i * d + c] = s.velocities[(n - 1 - i) * d + c];
    }
  simulate(s, cfg, k, nullptr);
  simulate(p, cfg, k, nullptr);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) {
      const double dx = minimum_image_1d(p.positions[i * d + c] - s.positions[(n - 1 - i) * d + c]);
      CHECK(std::abs(dx) < 1e-12);
    }
}

TEST_CASE("non-finite coordinates abort the step") {
  auto cfg = make_config(2, 1, 0.0, 1e-3, 1.0, zero_kernel(1));
  ParticleState s;
  s.d = 1;
  s.positions = {0.1, 0.5};
  s.velocities = {0.0, std::numeric_limits<double>::infinity()};
  try {
    step(s, cfg, Kernel(cfg.kernel));
    FAIL("expected NonFiniteState");
  } catch (const NonFiniteState& e) {
    CHECK(e.particle() == 1);
    CHECK(e.step() == 1);
    CHECK(e.exit_code() == 3);
  }
}

TEST_CASE("config validation and serialization") {
  auto cfg = make_config(10, 2, 0.5, 1e-3, 1.0, coulomb_kernel(2));
  const Json j = cfg;
  CHECK(j.get<SimConfig>() == cfg);
  CHECK(step_count(cfg) == 1000);
  auto bad = cfg;
  bad.kernel.dim = 3;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}
