#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "meanfield/errors.hpp"
#include "meanfield/marginals.hpp"

using namespace meanfield;

namespace {

constexpr double kPi = std::numbers::pi;

SimConfig zero_config(int N, int d = 1) {
  SimConfig c;
  c.N = N;
  c.d = d;
  c.dt = 0.01;
  c.t_end = 0.01;
  c.kernel.family = KernelFamily::kZero;
  c.kernel.dim = d;
  return c;
}

GridDensity gaussian_density(double s, int x_bins, int v_bins, double v_max) {
  GridDensity f;
  f.spec = GridSpec{1, 1, x_bins, v_bins, v_max};
  f.values.resize(f.spec.total_cells());
  for (int i = 0; i < x_bins; ++i)
    for (int j = 0; j < v_bins; ++j) {
      const double v = f.spec.v_center(j);
      f.values[i * v_bins + j] = std::exp(-v * v / (2 * s * s)) / std::sqrt(2 * kPi * s * s);
    }
  return f;
}

GridDensity random_density(std::mt19937_64& rng, GridSpec g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridDensity f;
  f.spec = g;
  f.values.resize(g.total_cells());
  for (double& v : f.values) v = u(rng) < 0.3 ? 0.0 : u(rng) * 3.0;
  return f;
}

}  // namespace

TEST_CASE("frozen particles land in one cell") {
  const auto cfg = zero_config(10);
  EnsembleDataset ds;
  ds.config = cfg;
  ds.replica_count = 2;
  ds.snapshot_times = {0.0};
  ds.snapshot_steps = {0};
  Snapshot s{0.0, 0, std::vector<double>(10, 0.5), std::vector<double>(10, 0.0)};
  ds.snapshots = {{s}, {s}};
  const GridSpec g{1, 1, 8, 8, 2.0};
  const auto f = estimate_marginal(ds, 1, 0.0, g);
  size_t occupied = 0, where = 0;
  for (size_t c = 0; c < f.values.size(); ++c)
    if (f.values[c] > 0) {
      ++occupied;
      where = c;
    }
  CHECK(occupied == 1);
  int xi[3], vi[3];
  unpack_slot_cell(g, where, xi, vi);
  CHECK(xi[0] == 4);
  CHECK(vi[0] == 4);
  CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(estimate_marginal(ds, 1, 0.5, g), MissingData);
  CHECK_THROWS_AS(estimate_marginal(ds, 1, 0.0, GridSpec{1, 1, 3, 8, 2.0}), GridTooCoarse);
}

TEST_CASE("pair tuples") {
  CHECK(pair_tuples(3).size() == 6);
  const auto big = pair_tuples(128);
  CHECK(big.size() == kMaxPairTuples);
  for (const auto& [i, j] : big) CHECK(i != j);
  std::set<std::pair<int, int>> unique(big.begin(), big.end());
  CHECK(unique.size() == big.size());
}

TEST_CASE("k=2 marginal integrates to the k=1 marginal") {
  for (int N : {20, 64, 128}) {
    auto cfg = zero_config(N);
    InitialLaw law;
    law.perturbation = 0.4;
    const auto ds = init_ensemble(cfg, 5, law);
    // wide velocity box: with truncation the pair histogram also drops partners
    const GridSpec g{1, 1, 6, 5, 9.0};
    const auto f1 = estimate_marginal(ds, 1, 0.0, g);
    const auto f2 = estimate_marginal(ds, 2, 0.0, g);
    const auto m = first_slot_marginal(f2);
    for (size_t c = 0; c < f1.values.size(); ++c) CHECK(m.values[c] == doctest::Approx(f1.values[c]).epsilon(1e-12));
    CHECK(f1.mass() + f1.truncation_mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f2.mass() + f2.truncation_mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("k=2 estimate of a product law approaches the tensor square at rate R^-1/2") {
  std::vector<double> dist;
  for (int R : {100, 1000, 10000}) {
    auto cfg = zero_config(2);
    InitialLaw law;
    const auto ds = init_ensemble(cfg, R, law);
    const GridSpec g{1, 1, 4, 4, 3.0};
    const auto f1 = estimate_marginal(ds, 1, 0.0, g);
    const auto f2 = estimate_marginal(ds, 2, 0.0, g);
    dist.push_back(chaos_distance(f2, tensor_square(f1)).l1);
  }
  const double r1 = dist[1] / dist[0], r2 = dist[2] / dist[1];
  INFO(dist[0], " ", dist[1], " ", dist[2]);
  CHECK(r1 > 0.15);
  CHECK(r1 < 0.6);
  CHECK(r2 > 0.15);
  CHECK(r2 < 0.6);
}

TEST_CASE("weighted L^q norm") {
  const double s = 0.8;
  auto f = gaussian_density(s, 4, 256, 8 * s);
  const auto one = weighted_lq_norm(f, 1.0, 0.0, nullptr, 0);
  CHECK(one.value == doctest::Approx(f.mass()));
  CHECK(one.value == doctest::Approx(1.0).epsilon(1e-6));

  const double lambda = 0.1;
  const auto r = weighted_lq_norm(f, 2.0, lambda, nullptr, 0);
  const double exact = std::exp(lambda) / (2 * kPi * s * s) * std::sqrt(kPi / (1 / (s * s) - lambda));
  CHECK(r.value == doctest::Approx(exact).epsilon(0.01));

  auto g = f;
  for (double& v : g.values) v *= 3.0;
  CHECK(weighted_lq_norm(g, 2.5, lambda, nullptr, 0).value ==
        doctest::Approx(std::pow(3.0, 2.5) * weighted_lq_norm(f, 2.5, lambda, nullptr, 0).value).epsilon(1e-12));

  CHECK_THROWS_AS(weighted_lq_norm(f, 2.0, 100.0, nullptr, 0), WeightOverflow);
}

TEST_CASE("k=2 weight includes the pair potential") {
  KernelSpec ks;
  ks.family = KernelFamily::kSmoothFourier;
  ks.dim = 1;
  FourierMode m;
  m.wavevector[0] = 1;
  m.amplitude = 1.0;
  ks.modes.push_back(m);
  const Kernel k(ks);
  const GridSpec g{2, 1, 4, 0, 1.0};
  // cell (x1 = 1/8, x2 = 5/8): displacement -1/2
  const size_t cell = 0 * 4 + 2;
  const double r[1] = {-0.5};
  CHECK(cell_energy(g, cell, &k, 10) == doctest::Approx(2.0 + 0.2 * k.potential(r)));
  CHECK(cell_energy(g, cell, &k, 0) == 2.0);
}

TEST_CASE("Gaussian moment") {
  const double s = 1.0;
  auto f = gaussian_density(s, 4, 256, 8 * s);
  CHECK(gaussian_moment(f, 0.0) == doctest::Approx(f.mass()));
  const double beta = 0.2;
  CHECK(gaussian_moment(f, beta) == doctest::Approx(std::pow(1 - 2 * beta * s * s, -0.5)).epsilon(0.01));
  double prev = 0.0;
  for (double b = 0.0; b < 0.45; b += 0.05) {
    const double m = gaussian_moment(f, b);
    CHECK(m >= prev);
    prev = m;
  }
}

TEST_CASE("Hoelder check") {
  std::mt19937_64 rng(17);
  const GridSpec g{2, 1, 6, 4, 1.5};
  auto f = random_density(rng, g);
  CHECK_THROWS_AS(holder_check(std::vector<double>(6, 1.0), f, 1.5, 2.0), ExponentViolation);
  const auto zero = holder_check(std::vector<double>(6, 0.0), f, 1.5, 3.0);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.satisfied);
  const auto constant = holder_check(std::vector<double>(6, 2.0), f, std::numeric_limits<double>::infinity(), 2.0);
  CHECK(constant.satisfied);
  CHECK(constant.kernel_norm == 2.0);

  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const GridSpec gs{2, 1, 4 + t % 5, (t % 2) ? 0 : 4 + t % 3, 0.5 + u(rng)};
    auto h = random_density(rng, gs);
    std::vector<double> kg(gs.x_bins);
    for (double& v : kg) v = u(rng);
    CHECK(holder_check(kg, h, 1.5, 3.0).satisfied);
  }
}

TEST_CASE("chaos distance") {
  GridDensity a;
  a.spec = GridSpec{1, 1, 4, 0, 1.0};
  a.values = {4.0, 0.0, 0.0, 0.0};
  GridDensity b = a;
  b.values = {0.0, 0.0, 4.0, 0.0};
  const auto same = chaos_distance(a, a);
  CHECK(same.l1 == 0.0);
  CHECK(same.lq == 0.0);
  CHECK(chaos_distance(a, b).l1 == doctest::Approx(2.0));
  GridDensity c = a;
  c.spec.x_bins = 8;
  c.values.assign(8, 0.0);
  CHECK_THROWS_AS(chaos_distance(a, c), GridMismatch);
}

TEST_CASE("density tensor and CSV round trip") {
  auto f = gaussian_density(1.0, 4, 8, 3.0);
  f.time = 0.25;
  f.truncation_mass = 0.01;
  const auto back = from_tensor(decode_tensor(encode_tensor(to_tensor(f))));
  CHECK(back.values == f.values);
  CHECK(back.spec == f.spec);
  CHECK(back.time == 0.25);
  const auto csv = density_csv(f);
  CHECK(csv.substr(0, 14) == "x1,v1,density\r");
}
