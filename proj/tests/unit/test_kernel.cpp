#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "meanfield/errors.hpp"
#include "meanfield/kernel.hpp"
#include "meanfield/rng.hpp"
#include "meanfield/torus.hpp"

using namespace meanfield;

namespace {

constexpr double kPi = std::numbers::pi;

KernelSpec coulomb(int d, double alpha = 1.0) {
  KernelSpec s;
  s.family = KernelFamily::kCoulomb;
  s.dim = d;
  s.strength = alpha;
  return s;
}

KernelSpec mild(int d, double a) {
  KernelSpec s;
  s.family = KernelFamily::kMildPower;
  s.dim = d;
  s.power = a;
  return s;
}

KernelSpec smooth(int d) {
  KernelSpec s;
  s.family = KernelFamily::kSmoothFourier;
  s.dim = d;
  FourierMode m1;
  m1.wavevector[0] = 1;
  m1.amplitude = 1.0;
  s.modes.push_back(m1);
  if (d >= 2) {
    FourierMode m2;
    m2.wavevector[0] = 1;
    m2.wavevector[1] = -2;
    m2.amplitude = 0.3;
    s.modes.push_back(m2);
  }
  return s;
}

// Periodic Green's function of -Laplace = delta - 1 on the unit square,
// written as a one-dimensional image sum in y.
double green_2d(double x, double y) {
  y = std::abs(y);
  const double q = std::exp(-2 * kPi * y);
  const double s2 = std::sin(kPi * x);
  double g = 0.5 * y * y - 0.5 * y - std::log((1 - q) * (1 - q) + 4 * q * s2 * s2) / (4 * kPi);
  for (int k = 1; k < 40; ++k) {
    const double e = std::exp(-2 * kPi * k);
    g += std::cos(2 * kPi * k * x) * e * (std::exp(-2 * kPi * k * y) + std::exp(2 * kPi * k * y)) /
         (2 * kPi * k * (1 - e));
  }
  return g;
}

std::array<double, 3> sample_away_from_origin(std::mt19937_64& rng, int d, double rmin) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (;;) {
    std::array<double, 3> r{};
    double r2 = 0.0;
    for (int c = 0; c < d; ++c) {
      r[c] = u(rng);
      r2 += r[c] * r[c];
    }
    if (r2 >= rmin * rmin) return r;
  }
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vector") {
  const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
  const auto out2 = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                         {0xffffffffu, 0xffffffffu});
  CHECK(out2[0] == 0x408f276du);
  CHECK(out2[1] == 0x41c83b0eu);
  CHECK(out2[2] == 0xa20bc7c6u);
  CHECK(out2[3] == 0x6d5451fdu);
}

TEST_CASE("minimum image convention") {
  CHECK(minimum_image_1d(0.9 - 0.2) == doctest::Approx(-0.3));
  CHECK(minimum_image_1d(0.75 - 0.25) == -0.5);
  CHECK(minimum_image_1d(-0.5) == -0.5);
  CHECK(wrap_unit(-0.25) == 0.75);
  CHECK(wrap_unit(1.0) == 0.0);
}

TEST_CASE("coulomb d=1 closed form") {
  Kernel k(coulomb(1, 2.0));
  const double r[1] = {0.2};
  CHECK(k.force(r)[0] == doctest::Approx(2.0 * (1.0 - 0.4)));
  CHECK(k.potential(r) - k.shift() == doctest::Approx(2.0 * (0.04 - 0.2)));
  CHECK(k.shift() == doctest::Approx(0.5).epsilon(1e-9));
  const double zero[1] = {0.0};
  CHECK(k.potential(zero) == 0.0);
  CHECK(k.force(zero)[0] == 0.0);
}

TEST_CASE("even potential and odd force for every family") {
  std::vector<KernelSpec> specs;
  for (int d = 1; d <= 3; ++d) {
    specs.push_back(coulomb(d));
    specs.push_back(mild(d, 0.5));
    specs.push_back(smooth(d));
  }
  std::mt19937_64 rng(7);
  for (const auto& s : specs) {
    Kernel k(s);
    for (int t = 0; t < 50; ++t) {
      auto r = sample_away_from_origin(rng, s.dim, 0.01);
      std::array<double, 3> m{};
      for (int c = 0; c < s.dim; ++c) m[c] = -r[c];
      const std::span<const double> rs(r.data(), s.dim), ms(m.data(), s.dim);
      CHECK(k.potential(rs) == k.potential(ms));
      const auto a = k.force(rs), b = k.force(ms);
      for (int c = 0; c < s.dim; ++c) CHECK(a[c] == -b[c]);
    }
  }
}

TEST_CASE("force is minus the gradient of the potential") {
  std::vector<KernelSpec> specs;
  for (int d = 1; d <= 3; ++d) {
    specs.push_back(coulomb(d));
    specs.push_back(mild(d, 0.5));
    specs.push_back(smooth(d));
  }
  specs.push_back(mild(2, 1.0));
  specs.push_back(mild(3, 1.7));
  std::mt19937_64 rng(11);
  const double h = 1e-5;
  for (const auto& s : specs) {
    Kernel k(s);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      auto r = sample_away_from_origin(rng, s.dim, 0.15);
      const auto f = k.force(std::span<const double>(r.data(), s.dim));
      double err2 = 0.0;
      for (int c = 0; c < s.dim; ++c) {
        auto p = r, m = r;
        p[c] += h;
        m[c] -= h;
        const double g = (k.potential(std::span<const double>(p.data(), s.dim)) -
                          k.potential(std::span<const double>(m.data(), s.dim))) /
                         (2 * h);
        err2 += (f[c] + g) * (f[c] + g);
      }
      worst = std::max(worst, std::sqrt(err2));
    }
    INFO(to_string(s.family), " d=", s.dim);
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("2-D periodic Coulomb matches the image-sum Green's function") {
  Kernel k(coulomb(2, 1.5));
  std::mt19937_64 rng(3);
  const double ref[2] = {0.31, -0.17};
  const double phi_ref = k.potential(ref);
  const double g_ref = 2 * kPi * 1.5 * green_2d(ref[0], ref[1]);
  for (int t = 0; t < 100; ++t) {
    auto r = sample_away_from_origin(rng, 2, 0.02);
    const double x[2] = {r[0], r[1]};
    const double expected = 2 * kPi * 1.5 * green_2d(x[0], x[1]) - g_ref;
    CHECK(k.potential(x) - phi_ref == doctest::Approx(expected).epsilon(1e-9).scale(1.0));
  }
  // Force from fourth-order differences of the oracle.
  const double h = 1e-3;
  for (int t = 0; t < 20; ++t) {
    auto r = sample_away_from_origin(rng, 2, 0.1);
    const double x[2] = {r[0], r[1]};
    const auto f = k.force(x);
    auto g = [&](double a, double b) { return 2 * kPi * 1.5 * green_2d(a, b); };
    const double gx = (-g(x[0] + 2 * h, x[1]) + 8 * g(x[0] + h, x[1]) - 8 * g(x[0] - h, x[1]) +
                       g(x[0] - 2 * h, x[1])) / (12 * h);
    const double gy = (-g(x[0], x[1] + 2 * h) + 8 * g(x[0], x[1] + h) - 8 * g(x[0], x[1] - h) +
                       g(x[0], x[1] - 2 * h)) / (12 * h);
    CHECK(f[0] == doctest::Approx(-gx).epsilon(1e-7).scale(1.0));
    CHECK(f[1] == doctest::Approx(-gy).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("Ewald correction is independent of the splitting width up to a constant") {
  for (int d = 2; d <= 3; ++d) {
    const double w1 = default_ewald_width(2, 8);
    const double w2 = 0.8 * w1;
    const double o[3] = {0.05, 0.0, 0.0};
    double p1o, p2o, k[3];
    ewald_coulomb_correction(d, 1.0, w1, 3, 10, o, &p1o, k);
    ewald_coulomb_correction(d, 1.0, w2, 3, 10, o, &p2o, k);
    std::mt19937_64 rng(d);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int t = 0; t < 30; ++t) {
      const double r[3] = {u(rng), u(rng), u(rng)};
      double p1, p2, k1[3], k2[3];
      ewald_coulomb_correction(d, 1.0, w1, 3, 10, r, &p1, k1);
      ewald_coulomb_correction(d, 1.0, w2, 3, 10, r, &p2, k2);
      CHECK((p1 - p1o) == doctest::Approx(p2 - p2o).epsilon(1e-10).scale(1.0));
      for (int c = 0; c < d; ++c) CHECK(k1[c] == doctest::Approx(k2[c]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("tabulated and direct corrections agree") {
  KernelSpec direct = coulomb(2);
  direct.table_resolution = 0;
  Kernel a(coulomb(2)), b(direct);
  CHECK(a.shift() == doctest::Approx(b.shift()).epsilon(1e-9));
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    auto r = sample_away_from_origin(rng, 2, 0.01);
    const double x[2] = {r[0], r[1]};
    CHECK(a.potential(x) == doctest::Approx(b.potential(x)).epsilon(1e-9).scale(1.0));
    const auto fa = a.force(x), fb = b.force(x);
    CHECK(fa[0] == doctest::Approx(fb[0]).epsilon(1e-8).scale(1.0));
    CHECK(fa[1] == doctest::Approx(fb[1]).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("shifted potential is nonnegative") {
  std::vector<KernelSpec> specs;
  for (int d = 1; d <= 3; ++d) {
    specs.push_back(coulomb(d));
    specs.push_back(mild(d, 0.5));
    specs.push_back(smooth(d));
  }
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const auto& s : specs) {
    Kernel k(s);
    for (int t = 0; t < 300; ++t) {
      const double r[3] = {u(rng), u(rng), u(rng)};
      CHECK(k.potential(std::span<const double>(r, s.dim)) >= 0.0);
    }
  }
}

TEST_CASE("invalid kernel configurations") {
  CHECK_THROWS_AS(Kernel(mild(2, 2.0)), NonIntegrableSingularity);
  CHECK_THROWS_AS(Kernel(mild(1, 1.5)), NonIntegrableSingularity);
  CHECK_THROWS_AS(Kernel(mild(2, -1.0)), ConfigError);
  CHECK_THROWS_AS(Kernel(coulomb(4)), ConfigError);
  CHECK_THROWS_AS(Kernel(coulomb(2, -1.0)), ConfigError);
}

TEST_CASE("spec round-trips through JSON and hashes deterministically") {
  auto s = smooth(2);
  s.potential_shift = 0.25;
  const Json j = s;
  const auto back = j.get<KernelSpec>();
  CHECK(back == s);
  CHECK(Kernel(s).hash() == Kernel(back).hash());
  CHECK(Kernel(s).hash() != Kernel(smooth(1)).hash());
}

TEST_CASE("force symbols") {
  Kernel k(smooth(2));
  const int m[2] = {1, 0};
  const int mm[2] = {-1, 0};
  // K = 2 pi a sin(2 pi x) e_x  ->  K-hat(+-1) = -+ i pi a
  CHECK(k.force_symbol(m, 0).imag() == doctest::Approx(-kPi));
  CHECK(k.force_symbol(mm, 0).imag() == doctest::Approx(kPi));
  Kernel c1(coulomb(1));
  const int one[1] = {1};
  // K = sign(x) - 2x has sine series sum 2/(pi k) sin(2 pi k x)
  CHECK(c1.force_symbol(one, 0).imag() == doctest::Approx(-1.0 / kPi));
  CHECK_THROWS_AS(Kernel(mild(1, 0.5)).force_symbol(one, 0), ConfigError);
}

TEST_CASE("kernel norms: power counting") {
  CHECK_THROWS_AS(estimate_kernel_norms(Kernel(coulomb(2)), 2.0, 0.1, 33), DivergentIntegral);
  CHECK_THROWS_AS(estimate_kernel_norms(Kernel(coulomb(3)), 1.2, 0.1, 33), DivergentIntegral);
  CHECK_THROWS_AS(estimate_kernel_norms(Kernel(mild(1, 0.5)), 2.0, 0.1, 33), DivergentIntegral);
  CHECK_THROWS_AS(estimate_kernel_norms(Kernel(coulomb(2, 1.0)), 1.5, 2.5, 33), DivergentIntegral);
  CHECK_NOTHROW(estimate_kernel_norms(Kernel(mild(1, 0.5)), 1.9, 0.1, 33));
}

TEST_CASE("kernel norms: zero and smooth kernels") {
  KernelSpec z;
  z.family = KernelFamily::kZero;
  z.dim = 2;
  Kernel kz(z);
  const auto rz = estimate_kernel_norms(kz, 2.0, 1.0, 33);
  CHECK(rz.lp_norm == 0.0);
  CHECK(rz.exp_phi_integral == doctest::Approx(std::exp(kz.shift())));

  // Oracle: periodic trapezoid on a fine grid (spectrally accurate here).
  Kernel ks(smooth(1));
  const auto rs = estimate_kernel_norms(ks, 3.0, 0.7, 101);
  const int n = 4000;
  double lp = 0.0, ex = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x[1] = {-0.5 + double(i) / n};
    lp += std::pow(std::abs(2 * kPi * std::sin(2 * kPi * x[0])), 3.0) / n;
    ex += std::exp(0.7 * (std::cos(2 * kPi * x[0]) + ks.shift())) / n;
  }
  CHECK(rs.lp_norm == doctest::Approx(std::cbrt(lp)).epsilon(1e-6));
  CHECK(rs.exp_phi_integral == doctest::Approx(ex).epsilon(1e-6));
}

TEST_CASE("kernel norms: singular 2-D Coulomb against polar quadrature") {
  Kernel k(coulomb(2, 1.0));
  const double p = 1.5, theta = 0.5;
  const auto rep = estimate_kernel_norms(k, p, theta, 129);
  // Oracle: polar coordinates on the disk r < 1/4 (substituting r = u^m to
  // tame the endpoint singularity) plus a fine midpoint rule elsewhere.
  double lp = 0.0, ex = 0.0;
  const int nr = 400, nt = 256, mexp = 4;
  for (int i = 0; i < nr; ++i) {
    const double u = (i + 0.5) / nr;
    const double rr = 0.25 * std::pow(u, mexp);
    const double dr = 0.25 * mexp * std::pow(u, mexp - 1) / nr;
    for (int j = 0; j < nt; ++j) {
      const double a = 2 * kPi * (j + 0.5) / nt;
      const double x[2] = {rr * std::cos(a), rr * std::sin(a)};
      const auto f = k.force(x);
      const double w = rr * dr * 2 * kPi / nt;
      lp += w * std::pow(std::hypot(f[0], f[1]), p);
      ex += w * std::exp(theta * k.potential(x));
    }
  }
  const int n = 1200;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x[2] = {-0.5 + (i + 0.5) / n, -0.5 + (j + 0.5) / n};
      if (std::hypot(x[0], x[1]) < 0.25) continue;
      const auto f = k.force(x);
      lp += std::pow(std::hypot(f[0], f[1]), p) / (double(n) * n);
      ex += std::exp(theta * k.potential(x)) / (double(n) * n);
    }
  // the midpoint part has an O(h) boundary error at the circle
  CHECK(rep.lp_norm == doctest::Approx(std::pow(lp, 1.0 / p)).epsilon(2e-3));
  CHECK(rep.exp_phi_integral == doctest::Approx(ex).epsilon(2e-3));
  CHECK(rep.lp_quadrature_error < 0.05 * rep.lp_norm);
}
