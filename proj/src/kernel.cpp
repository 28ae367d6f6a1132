#include "meanfield/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "meanfield/errors.hpp"
#include "meanfield/quadrature.hpp"

namespace meanfield {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kShiftMargin = 1e-12;
// Smooth cutoff of the mild power kernel: identity below kCutInner,
// zero beyond kCutOuter (< 1/2 keeps the support inside the unit cell).
constexpr double kCutInner = 0.25;
constexpr double kCutOuter = 0.45;

double e1(double z) { return -std::expint(-z); }

// E1(z) + ln z, regular at z = 0.
double e1_plus_log(double z) {
  if (z < 1.0) {
    double sum = 0.0, term = 1.0;
    for (int j = 1; j < 40; ++j) {
      term *= -z / j;  // (-z)^j / j!
      sum += term / j;
      if (std::abs(term) < 1e-18) break;
    }
    return -std::numbers::egamma - sum;
  }
  return e1(z) + std::log(z);
}

// (-erf(u) + 2/sqrt(pi) u exp(-u^2)) / u^3, regular at u = 0.
double erf_remainder_over_cube(double u) {
  const double two_over_sqrt_pi = 2.0 / std::sqrt(kPi);
  if (u < 0.5) {
    const double u2 = u * u;
    double sum = 0.0, pw = 1.0, fact = 1.0;
    for (int j = 1; j < 30; ++j) {
      fact *= j;
      const double sign = (j % 2) ? -1.0 : 1.0;
      sum += sign * 2.0 * j / (fact * (2.0 * j + 1.0)) * pw;
      pw *= u2;
      if (pw < 1e-20) break;
    }
    return two_over_sqrt_pi * sum;
  }
  return (-std::erf(u) + two_over_sqrt_pi * u * std::exp(-u * u)) / (u * u * u);
}

// Smooth step: 1 on [0, kCutInner], 0 on [kCutOuter, inf).
void cutoff(double r, double& chi, double& dchi) {
  if (r <= kCutInner) {
    chi = 1.0;
    dchi = 0.0;
    return;
  }
  if (r >= kCutOuter) {
    chi = 0.0;
    dchi = 0.0;
    return;
  }
  const double width = kCutOuter - kCutInner;
  const double t = (r - kCutInner) / width;
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  const double s = a + b;
  chi = a / s;
  dchi = -a * b * (1.0 / ((1.0 - t) * (1.0 - t)) + 1.0 / (t * t)) / (s * s) / width;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::kCoulomb: return "coulomb";
    case KernelFamily::kMildPower: return "mild_power";
    case KernelFamily::kSmoothFourier: return "smooth_fourier";
    case KernelFamily::kZero: return "zero";
  }
  return "zero";
}

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "coulomb") return KernelFamily::kCoulomb;
  if (s == "mild_power") return KernelFamily::kMildPower;
  if (s == "smooth_fourier") return KernelFamily::kSmoothFourier;
  if (s == "zero") return KernelFamily::kZero;
  throw ConfigError("unknown kernel family '" + s + "'");
}

void to_json(Json& j, const FourierMode& m) {
  j = Json{{"m", m.wavevector}, {"a", m.amplitude}};
}

void from_json(const Json& j, FourierMode& m) {
  const auto v = j.at("m").get<std::vector<int>>();
  if (v.empty() || v.size() > kMaxDim) throw ConfigError("mode wavevector must have 1..3 entries");
  m.wavevector = {};
  std::copy(v.begin(), v.end(), m.wavevector.begin());
  m.amplitude = j.at("a").get<double>();
}

void to_json(Json& j, const KernelSpec& s) {
  j = Json{{"family", to_string(s.family)},
           {"strength", s.strength},
           {"dim", s.dim},
           {"power", s.power},
           {"modes", s.modes},
           {"image_shells", s.image_shells},
           {"fourier_cutoff", s.fourier_cutoff},
           {"table_resolution", s.table_resolution}};
  j["potential_shift"] = s.potential_shift ? Json(*s.potential_shift) : Json(nullptr);
}

void from_json(const Json& j, KernelSpec& s) {
  s = KernelSpec{};
  s.family = kernel_family_from_string(j.at("family").get<std::string>());
  s.dim = j.at("dim").get<int>();
  s.strength = j.value("strength", 1.0);
  s.power = j.value("power", 0.5);
  if (j.contains("modes")) s.modes = j.at("modes").get<std::vector<FourierMode>>();
  s.image_shells = j.value("image_shells", 2);
  s.fourier_cutoff = j.value("fourier_cutoff", 8);
  s.table_resolution = j.value("table_resolution", -1);
  if (j.contains("potential_shift") && !j.at("potential_shift").is_null())
    s.potential_shift = j.at("potential_shift").get<double>();
}

// ---------------------------------------------------------------------------
// Ewald sum for the periodic Coulomb correction

double default_ewald_width(int shells, int cutoff) {
  return std::sqrt((shells + 0.5) / (kPi * (cutoff + 1)));
}

void ewald_coulomb_correction(int dim, double alpha, double eta, int shells, int cutoff, const double* r,
                              double* phi0, double* k0) {
  double phi = 0.0;
  double kv[kMaxDim] = {0.0, 0.0, 0.0};
  double r2 = 0.0;
  for (int c = 0; c < dim; ++c) r2 += r[c] * r[c];
  const double eta2 = eta * eta;

  // Central image with the bare singular term removed.
  if (dim == 2) {
    const double z = r2 / eta2;
    phi += 0.5 * alpha * e1_plus_log(z) + alpha * std::log(eta);
    const double g = z < 1e-10 ? 1.0 - 0.5 * z : -std::expm1(-z) / z;
    for (int c = 0; c < 2; ++c) kv[c] -= alpha / eta2 * g * r[c];
  } else {
    const double rr = std::sqrt(r2);
    const double u = rr / eta;
    phi += rr > 0.0 ? -alpha * std::erf(u) / rr : -2.0 * alpha / (eta * std::sqrt(kPi));
    const double g = alpha / (eta2 * eta) * erf_remainder_over_cube(u);
    for (int c = 0; c < 3; ++c) kv[c] += g * r[c];
  }

  // Remaining real-space images.
  const int span = 2 * shells + 1;
  int total = 1;
  for (int c = 0; c < dim; ++c) total *= span;
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    double y[kMaxDim] = {0.0, 0.0, 0.0};
    bool origin = true;
    double rho2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const int n = rem % span - shells;
      rem /= span;
      origin = origin && n == 0;
      y[c] = r[c] + n;
      rho2 += y[c] * y[c];
    }
    if (origin) continue;
    const double zz = rho2 / eta2;
    if (zz > 700.0) continue;
    if (dim == 2) {
      phi += 0.5 * alpha * e1(zz);
      const double g = alpha * std::exp(-zz) / rho2;
      for (int c = 0; c < 2; ++c) kv[c] += g * y[c];
    } else {
      const double rho = std::sqrt(rho2);
      const double ec = std::erfc(rho / eta);
      phi += alpha * ec / rho;
      const double g = alpha * (ec / rho2 + 2.0 / (eta * std::sqrt(kPi)) * std::exp(-zz) / rho) / rho;
      for (int c = 0; c < 3; ++c) kv[c] += g * y[c];
    }
  }

  // Reciprocal sum over the half space k > 0 (lexicographic), doubled.
  std::vector<std::complex<double>> phase(static_cast<size_t>(dim * (cutoff + 1)));
  for (int c = 0; c < dim; ++c) {
    const std::complex<double> base = std::polar(1.0, 2.0 * kPi * r[c]);
    std::complex<double> acc = 1.0;
    for (int k = 0; k <= cutoff; ++k) {
      phase[c * (cutoff + 1) + k] = acc;
      acc *= base;
    }
  }
  const double prefactor = dim == 2 ? alpha / (2.0 * kPi) : alpha / kPi;
  const int kspan = 2 * cutoff + 1;
  int ktotal = 1;
  for (int c = 0; c < dim; ++c) ktotal *= kspan;
  for (int idx = 0; idx < ktotal; ++idx) {
    int rem = idx;
    int k[kMaxDim] = {0, 0, 0};
    for (int c = 0; c < dim; ++c) {
      k[c] = rem % kspan - cutoff;
      rem /= kspan;
    }
    // keep k with first nonzero component positive
    int first = 0;
    for (int c = dim - 1; c >= 0; --c)
      if (k[c] != 0) first = k[c];
    if (first <= 0) continue;
    double k2 = 0.0;
    std::complex<double> e = 1.0;
    for (int c = 0; c < dim; ++c) {
      k2 += double(k[c]) * k[c];
      const auto& ph = phase[c * (cutoff + 1) + std::abs(k[c])];
      e *= k[c] >= 0 ? ph : std::conj(ph);
    }
    const double coef = 2.0 * prefactor * std::exp(-kPi * kPi * eta2 * k2) / k2;
    phi += coef * e.real();
    for (int c = 0; c < dim; ++c) kv[c] += coef * 2.0 * kPi * k[c] * e.imag();
  }

  *phi0 = phi;
  for (int c = 0; c < dim; ++c) k0[c] = kv[c];
}

// ---------------------------------------------------------------------------
// Tabulated 2-D correction on the quadrant [0, 1/2]^2 (padded by two nodes),
// interpolated with 4x4 cubic Lagrange stencils.

class CorrectionTable {
 public:
  static constexpr int kPad = 2;

  CorrectionTable(int resolution, std::vector<double> data) : resolution_(resolution), data_(std::move(data)) {
    n_half_ = resolution / 2;
    side_ = n_half_ + 2 * kPad + 1;
    h_ = 1.0 / resolution;
  }

  static std::vector<double> build(double alpha, double eta, int shells, int cutoff, int resolution) {
    const int n_half = resolution / 2;
    const int side = n_half + 2 * kPad + 1;
    const double h = 1.0 / resolution;
    std::vector<double> data(3 * size_t(side) * side);
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        const double r[2] = {(i - kPad) * h, (j - kPad) * h};
        double phi, k[2];
        ewald_coulomb_correction(2, alpha, eta, shells, cutoff, r, &phi, k);
        const size_t at = size_t(i) * side + j;
        data[at] = phi;
        data[size_t(side) * side + at] = k[0];
        data[2 * size_t(side) * side + at] = k[1];
      }
    return data;
  }

  int resolution() const noexcept { return resolution_; }
  const std::vector<double>& data() const noexcept { return data_; }
  int side() const noexcept { return side_; }

  /// Arguments must be nonnegative and at most 1/2.
  void eval(double x, double y, double* phi, double* kx, double* ky) const noexcept {
    double wx[4], wy[4];
    const int ix = weights(x, wx);
    const int iy = weights(y, wy);
    const size_t plane = size_t(side_) * side_;
    double p = 0.0, a = 0.0, b = 0.0;
    for (int u = 0; u < 4; ++u) {
      const size_t row = size_t(ix + u) * side_ + iy;
      double pr = 0.0, ar = 0.0, br = 0.0;
      for (int v = 0; v < 4; ++v) {
        pr += wy[v] * data_[row + v];
        ar += wy[v] * data_[plane + row + v];
        br += wy[v] * data_[2 * plane + row + v];
      }
      p += wx[u] * pr;
      a += wx[u] * ar;
      b += wx[u] * br;
    }
    *phi = p;
    *kx = a;
    *ky = b;
  }

  void eval_grad(double x, double y, double* kx, double* ky) const noexcept {
    double wx[4], wy[4];
    const int ix = weights(x, wx);
    const int iy = weights(y, wy);
    const size_t plane = size_t(side_) * side_;
    double a = 0.0, b = 0.0;
    for (int u = 0; u < 4; ++u) {
      const size_t row = size_t(ix + u) * side_ + iy;
      double ar = 0.0, br = 0.0;
      for (int v = 0; v < 4; ++v) {
        ar += wy[v] * data_[plane + row + v];
        br += wy[v] * data_[2 * plane + row + v];
      }
      a += wx[u] * ar;
      b += wx[u] * br;
    }
    *kx = a;
    *ky = b;
  }

 private:
  // Returns the first stencil row (already offset by the padding).
  int weights(double x, double* w) const noexcept {
    const double t = x / h_;
    int i0 = static_cast<int>(t);
    if (i0 > n_half_) i0 = n_half_;
    const double f = t - i0;
    w[0] = -f * (f - 1.0) * (f - 2.0) / 6.0;
    w[1] = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    w[2] = -(f + 1.0) * f * (f - 2.0) / 2.0;
    w[3] = (f + 1.0) * f * (f - 1.0) / 6.0;
    return i0 - 1 + kPad;
  }

  int resolution_;
  int n_half_;
  int side_;
  double h_;
  std::vector<double> data_;
};

namespace {

std::mutex g_table_mutex;
std::map<std::string, std::weak_ptr<const CorrectionTable>> g_tables;
std::optional<std::string> g_cache_dir;

std::string cache_dir() {
  if (g_cache_dir) return *g_cache_dir;
  if (const char* env = std::getenv("MEANFIELD_KERNEL_CACHE")) return env;
  return {};
}

std::shared_ptr<const CorrectionTable> correction_table(double alpha, double eta, int shells, int cutoff,
                                                        int resolution) {
  const Json key{{"kind", "coulomb2d_correction"}, {"strength", alpha}, {"width", eta},
                 {"image_shells", shells}, {"fourier_cutoff", cutoff}, {"resolution", resolution}};
  const std::string hash = content_hash(key);
  std::lock_guard lock(g_table_mutex);
  if (auto it = g_tables.find(hash); it != g_tables.end())
    if (auto sp = it->second.lock()) return sp;

  std::shared_ptr<const CorrectionTable> table;
  const std::string dir = cache_dir();
  const std::filesystem::path file = dir.empty() ? std::filesystem::path{}
                                                 : std::filesystem::path(dir) / ("coulomb2d_" + hash + ".mft");
  if (!dir.empty() && std::filesystem::exists(file)) {
    try {
      Tensor t = read_tensor(file);
      if (t.header.value("spec_hash", "") == hash && t.header.value("resolution", 0) == resolution)
        table = std::make_shared<CorrectionTable>(resolution, std::move(t.values));
    } catch (const Error&) {
      table.reset();  // unreadable cache entries are rebuilt
    }
  }
  if (!table) {
    auto data = CorrectionTable::build(alpha, eta, shells, cutoff, resolution);
    table = std::make_shared<CorrectionTable>(resolution, std::move(data));
    if (!dir.empty()) {
      Tensor t;
      t.header = {{"spec_hash", hash}, {"resolution", resolution}, {"fields", {"phi0", "k0x", "k0y"}}};
      const size_t side = size_t(table->side());
      t.shape = {3, side, side};
      t.values = table->data();
      write_tensor(file, t);
    }
  }
  g_tables[hash] = table;
  return table;
}

// Minimum of f over a box by a node scan followed by coordinate-wise
// golden-section refinement around the best node.
template <class F>
double minimize_on_box(F&& f, int dim, double lo, double hi, int nodes) {
  const double h = (hi - lo) / (nodes - 1);
  double best = std::numeric_limits<double>::infinity();
  std::array<double, kMaxDim> arg{};
  int total = 1;
  for (int c = 0; c < dim; ++c) total *= nodes;
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    std::array<double, kMaxDim> x{};
    for (int c = 0; c < dim; ++c) {
      x[c] = lo + (rem % nodes) * h;
      rem /= nodes;
    }
    const double v = f(x.data());
    if (v < best) {
      best = v;
      arg = x;
    }
  }
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int sweep = 0; sweep < 3; ++sweep)
    for (int c = 0; c < dim; ++c) {
      double a = std::max(lo, arg[c] - h), b = std::min(hi, arg[c] + h);
      auto eval_at = [&](double t) {
        auto y = arg;
        y[c] = t;
        return f(y.data());
      };
      double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
      double f1 = eval_at(x1), f2 = eval_at(x2);
      for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
          b = x2; x2 = x1; f2 = f1;
          x1 = b - golden * (b - a); f1 = eval_at(x1);
        } else {
          a = x1; x1 = x2; f1 = f2;
          x2 = a + golden * (b - a); f2 = eval_at(x2);
        }
      }
      const double xm = 0.5 * (a + b);
      const double fm = eval_at(xm);
      if (fm < best) {
        best = fm;
        arg[c] = xm;
      }
    }
  return best;
}

}  // namespace

void set_kernel_cache_dir(const std::string& dir) {
  std::lock_guard lock(g_table_mutex);
  g_cache_dir = dir;
}

// ---------------------------------------------------------------------------
// Kernel

Kernel::Kernel(KernelSpec spec) : spec_(std::move(spec)) {
  const int d = spec_.dim;
  if (d < 1 || d > kMaxDim) throw ConfigError("kernel dimension must be 1, 2 or 3");
  if (!std::isfinite(spec_.strength)) throw ConfigError("kernel strength must be finite");
  switch (spec_.family) {
    case KernelFamily::kCoulomb:
      if (spec_.strength < 0.0)
        throw ConfigError("attractive (negative strength) Coulomb kernels are not supported");
      if (spec_.image_shells < 1 || spec_.fourier_cutoff < 1)
        throw ConfigError("Ewald image_shells and fourier_cutoff must be >= 1");
      break;
    case KernelFamily::kMildPower:
      if (!(spec_.power > 0.0)) throw ConfigError("mild_power exponent must be positive");
      if (spec_.power >= d)
        throw NonIntegrableSingularity("mild_power exponent " + std::to_string(spec_.power) +
                                       " >= dimension: the force is not locally integrable");
      if (spec_.strength < 0.0) throw ConfigError("attractive mild_power kernels are not supported");
      break;
    case KernelFamily::kSmoothFourier:
      for (const auto& m : spec_.modes)
        for (int c = d; c < kMaxDim; ++c)
          if (m.wavevector[c] != 0) throw ConfigError("Fourier mode has components beyond the kernel dimension");
      break;
    case KernelFamily::kZero:
      break;
  }
  hash_ = content_hash(Json(spec_));

  if (spec_.family == KernelFamily::kCoulomb && d >= 2) {
    ewald_width_ = default_ewald_width(spec_.image_shells, spec_.fourier_cutoff);
    const int res = spec_.table_resolution < 0 ? (d == 2 ? 512 : 0) : spec_.table_resolution;
    if (res > 0) {
      if (d != 2) throw ConfigError("tabulated Coulomb corrections are only available in d = 2");
      if (res < 16 || res % 2) throw ConfigError("table_resolution must be even and >= 16");
      table_ = correction_table(spec_.strength, ewald_width_, spec_.image_shells, spec_.fourier_cutoff, res);
    }
  }

  if (spec_.potential_shift) {
    shift_ = *spec_.potential_shift;
    return;
  }
  auto raw = [this](const double* r) {
    double r2 = 0.0;
    for (int c = 0; c < spec_.dim; ++c) r2 += r[c] * r[c];
    return r2 < 1e-20 ? std::numeric_limits<double>::infinity() : raw_potential(r);
  };
  double minimum = 0.0;
  switch (spec_.family) {
    case KernelFamily::kZero:
      minimum = 0.0;
      break;
    case KernelFamily::kSmoothFourier: {
      const int nodes = d == 1 ? 4097 : d == 2 ? 257 : 65;
      minimum = minimize_on_box(raw, d, -0.5, 0.5, nodes);
      break;
    }
    case KernelFamily::kMildPower: {
      // Radial: phi(r) = s(r) chi(r), and phi = 0 beyond the cutoff.
      auto radial = [&](const double* r) {
        const double x[kMaxDim] = {std::max(r[0], 1e-12), 0.0, 0.0};
        return raw_potential(x);
      };
      minimum = std::min(0.0, minimize_on_box(radial, 1, 0.0, kCutOuter, 20001));
      break;
    }
    case KernelFamily::kCoulomb: {
      const int nodes = d == 1 ? 4097 : d == 2 ? 65 : 17;
      minimum = minimize_on_box(raw, d, 0.0, 0.5, nodes);
      break;
    }
  }
  shift_ = -minimum + kShiftMargin;
}

void Kernel::coulomb_correction(const double* r, double* phi, double* grad_out) const noexcept {
  // The periodic Coulomb correction is even in each coordinate separately;
  // evaluating on |r| makes the symmetry exact in floating point.
  double a[kMaxDim] = {0.0, 0.0, 0.0};
  for (int c = 0; c < spec_.dim; ++c) a[c] = std::abs(r[c]);
  double k[kMaxDim] = {0.0, 0.0, 0.0};
  if (table_) {
    if (phi) table_->eval(a[0], a[1], phi, &k[0], &k[1]);
    else table_->eval_grad(a[0], a[1], &k[0], &k[1]);
  } else {
    double unused;
    ewald_coulomb_correction(spec_.dim, spec_.strength, ewald_width_, spec_.image_shells, spec_.fourier_cutoff, a,
                             phi ? phi : &unused, k);
  }
  for (int c = 0; c < spec_.dim; ++c) grad_out[c] = r[c] == 0.0 ? 0.0 : (r[c] < 0.0 ? -k[c] : k[c]);
}

double Kernel::raw_potential(const double* r) const noexcept {
  const int d = spec_.dim;
  const double alpha = spec_.strength;
  double r2 = 0.0;
  for (int c = 0; c < d; ++c) r2 += r[c] * r[c];
  switch (spec_.family) {
    case KernelFamily::kZero:
      return 0.0;
    case KernelFamily::kSmoothFourier: {
      double phi = 0.0;
      for (const auto& m : spec_.modes) {
        double arg = 0.0;
        for (int c = 0; c < d; ++c) arg += m.wavevector[c] * r[c];
        phi += m.amplitude * std::cos(2.0 * kPi * arg);
      }
      return alpha * phi;
    }
    case KernelFamily::kMildPower: {
      const double rr = std::sqrt(r2);
      double chi, dchi;
      cutoff(rr, chi, dchi);
      if (chi == 0.0) return 0.0;
      const double a = spec_.power;
      const double s = a == 1.0 ? -alpha * std::log(rr) : -alpha * std::pow(rr, 1.0 - a) / (1.0 - a);
      return s * chi;
    }
    case KernelFamily::kCoulomb: {
      if (d == 1) {
        const double x = std::abs(r[0]);
        return alpha * (x * x - x);
      }
      double phi0, k0[kMaxDim];
      coulomb_correction(r, &phi0, k0);
      if (d == 2) return -0.5 * alpha * std::log(r2) + phi0;
      return alpha / std::sqrt(r2) + phi0;
    }
  }
  return 0.0;
}

double Kernel::potential_unchecked(const double* r) const noexcept {
  double r2 = 0.0;
  for (int c = 0; c < spec_.dim; ++c) r2 += r[c] * r[c];
  if (r2 == 0.0) return 0.0;
  return raw_potential(r) + shift_;
}

void Kernel::force_unchecked(const double* r, double* out) const noexcept {
  const int d = spec_.dim;
  const double alpha = spec_.strength;
  double r2 = 0.0;
  for (int c = 0; c < d; ++c) {
    r2 += r[c] * r[c];
    out[c] = 0.0;
  }
  if (r2 == 0.0) return;
  switch (spec_.family) {
    case KernelFamily::kZero:
      return;
    case KernelFamily::kSmoothFourier:
      for (const auto& m : spec_.modes) {
        double arg = 0.0;
        for (int c = 0; c < d; ++c) arg += m.wavevector[c] * r[c];
        const double s = alpha * m.amplitude * 2.0 * kPi * std::sin(2.0 * kPi * arg);
        for (int c = 0; c < d; ++c) out[c] += s * m.wavevector[c];
      }
      return;
    case KernelFamily::kMildPower: {
      const double rr = std::sqrt(r2);
      double chi, dchi;
      cutoff(rr, chi, dchi);
      if (chi == 0.0 && dchi == 0.0) return;
      const double a = spec_.power;
      const double s = a == 1.0 ? -alpha * std::log(rr) : -alpha * std::pow(rr, 1.0 - a) / (1.0 - a);
      const double g = (alpha * std::pow(rr, -a) * chi - s * dchi) / rr;
      for (int c = 0; c < d; ++c) out[c] = g * r[c];
      return;
    }
    case KernelFamily::kCoulomb: {
      if (d == 1) {
        out[0] = alpha * ((r[0] > 0.0 ? 1.0 : -1.0) - 2.0 * r[0]);
        return;
      }
      double k0[kMaxDim];
      coulomb_correction(r, nullptr, k0);
      const double inv = d == 2 ? 1.0 / r2 : 1.0 / (r2 * std::sqrt(r2));
      for (int c = 0; c < d; ++c) out[c] = alpha * r[c] * inv + k0[c];
      return;
    }
  }
}

double Kernel::potential(std::span<const double> r) const {
  if (static_cast<int>(r.size()) != spec_.dim) throw ConfigError("displacement has the wrong dimension");
  double w[kMaxDim] = {0.0, 0.0, 0.0};
  for (int c = 0; c < spec_.dim; ++c) w[c] = minimum_image_1d(r[c]);
  return potential_unchecked(w);
}

std::array<double, kMaxDim> Kernel::force(std::span<const double> r) const {
  if (static_cast<int>(r.size()) != spec_.dim) throw ConfigError("displacement has the wrong dimension");
  double w[kMaxDim] = {0.0, 0.0, 0.0};
  for (int c = 0; c < spec_.dim; ++c) w[c] = minimum_image_1d(r[c]);
  std::array<double, kMaxDim> out{};
  force_unchecked(w, out.data());
  return out;
}

double Kernel::force_singularity_exponent() const noexcept {
  switch (spec_.family) {
    case KernelFamily::kCoulomb: return spec_.dim - 1.0;
    case KernelFamily::kMildPower: return spec_.power;
    default: return 0.0;
  }
}

PotentialSingularity Kernel::potential_singularity() const noexcept {
  if (spec_.strength == 0.0) return PotentialSingularity::kBounded;
  switch (spec_.family) {
    case KernelFamily::kCoulomb:
      return spec_.dim == 1 ? PotentialSingularity::kBounded
             : spec_.dim == 2 ? PotentialSingularity::kLogarithmic
                              : PotentialSingularity::kPower;
    case KernelFamily::kMildPower:
      return spec_.power < 1.0    ? PotentialSingularity::kBounded
             : spec_.power == 1.0 ? PotentialSingularity::kLogarithmic
                                  : PotentialSingularity::kPower;
    default:
      return PotentialSingularity::kBounded;
  }
}

bool Kernel::has_analytic_symbol() const noexcept { return spec_.family != KernelFamily::kMildPower; }

std::complex<double> Kernel::force_symbol(std::span<const int> k, int c) const {
  const int d = spec_.dim;
  const std::complex<double> i(0.0, 1.0);
  switch (spec_.family) {
    case KernelFamily::kZero:
      return 0.0;
    case KernelFamily::kCoulomb: {
      double k2 = 0.0;
      for (int a = 0; a < d; ++a) k2 += double(k[a]) * k[a];
      if (k2 == 0.0) return 0.0;
      // -Laplacian phi = c_d * strength * (delta - 1), c_d = surface of the unit sphere.
      const double cd = d == 1 ? 2.0 : d == 2 ? 2.0 * kPi : 4.0 * kPi;
      return -i * cd * spec_.strength * double(k[c]) / (2.0 * kPi * k2);
    }
    case KernelFamily::kSmoothFourier: {
      std::complex<double> sum = 0.0;
      for (const auto& m : spec_.modes) {
        bool plus = true, minus = true;
        for (int a = 0; a < d; ++a) {
          plus = plus && m.wavevector[a] == k[a];
          minus = minus && m.wavevector[a] == -k[a];
        }
        const double amp = kPi * spec_.strength * m.amplitude * m.wavevector[c];
        if (plus) sum += -i * amp;
        if (minus) sum += i * amp;
      }
      return sum;
    }
    case KernelFamily::kMildPower:
      break;
  }
  throw ConfigError("mild_power kernels have no closed-form Fourier symbol");
}

// ---------------------------------------------------------------------------
// Kernel norms

void to_json(Json& j, const KernelNormReport& r) {
  j = Json{{"p_exponent", r.p_exponent},       {"lp_norm", r.lp_norm},
           {"theta_exp", r.theta_exp},         {"exp_phi_integral", r.exp_phi_integral},
           {"quadrature_error", r.quadrature_error}, {"lp_quadrature_error", r.lp_quadrature_error},
           {"exp_quadrature_error", r.exp_quadrature_error}, {"resolution", r.resolution}};
}

namespace {

struct NormIntegrals {
  double lp_power = 0.0;  // int |K|^p
  double exp_phi = 0.0;   // int exp(theta phi)
};

// Integrates over the cube [-c, c]^d by splitting it into 2d pyramids with
// apex at the origin: x = s w, w on a face, dx = c s^{d-1} ds dw. Along each
// ray the leading singular power is integrated exactly.
NormIntegrals central_block(const Kernel& kernel, double p, double theta, double c) {
  const int d = kernel.dim();
  const double alpha = kernel.spec().strength;
  const double a = kernel.force_singularity_exponent();
  const bool log_phi = kernel.potential_singularity() == PotentialSingularity::kLogarithmic;
  const double log_coef = kernel.log_coefficient();

  double phi_reg0 = 0.0;
  if (log_phi) {
    const double tiny[kMaxDim] = {1e-7, 0.0, 0.0};
    phi_reg0 = kernel.potential_unchecked(tiny) + log_coef * std::log(1e-7);
  }
  const double lead_lp = a > 0.0 ? std::pow(alpha, p) : 0.0;
  const double lead_exp = log_phi ? std::exp(theta * phi_reg0) : 0.0;
  const double exp_power = theta * log_coef;

  const auto ray = gauss_legendre(d == 3 ? 32 : 48, 0.0, 1.0);
  const auto face = gauss_legendre(d == 3 ? 12 : 24, -c, c);
  int face_points = 1;
  for (int e = 0; e < d - 1; ++e) face_points *= static_cast<int>(face.nodes.size());

  NormIntegrals out;
  for (int axis = 0; axis < d; ++axis)
    for (int side = -1; side <= 1; side += 2)
      for (int fp = 0; fp < face_points; ++fp) {
        double w[kMaxDim] = {0.0, 0.0, 0.0};
        double weight = c;
        int rem = fp;
        for (int e = 0, slot = 0; e < d; ++e) {
          if (e == axis) {
            w[e] = side * c;
            continue;
          }
          const int gi = rem % static_cast<int>(face.nodes.size());
          rem /= static_cast<int>(face.nodes.size());
          w[e] = face.nodes[gi];
          weight *= face.weights[gi];
          ++slot;
        }
        double wn2 = 0.0;
        for (int e = 0; e < d; ++e) wn2 += w[e] * w[e];
        const double wn = std::sqrt(wn2);

        double lp = 0.0, ex = 0.0;
        if (lead_lp > 0.0) lp += lead_lp * std::pow(wn, -a * p) / (d - a * p);
        if (log_phi) ex += lead_exp * std::pow(wn, -exp_power) / (d - exp_power);
        for (size_t q = 0; q < ray.nodes.size(); ++q) {
          const double s = ray.nodes[q];
          double x[kMaxDim] = {0.0, 0.0, 0.0};
          for (int e = 0; e < d; ++e) x[e] = s * w[e];
          const double jac = ray.weights[q] * std::pow(s, d - 1);
          double k[kMaxDim];
          kernel.force_unchecked(x, k);
          double kn2 = 0.0;
          for (int e = 0; e < d; ++e) kn2 += k[e] * k[e];
          double f_lp = std::pow(kn2, 0.5 * p);
          if (lead_lp > 0.0) f_lp -= lead_lp * std::pow(s * wn, -a * p);
          double f_ex = std::exp(theta * kernel.potential_unchecked(x));
          if (log_phi) f_ex -= lead_exp * std::pow(s * wn, -exp_power);
          lp += jac * f_lp;
          ex += jac * f_ex;
        }
        out.lp_power += weight * lp;
        out.exp_phi += weight * ex;
      }
  return out;
}

NormIntegrals integrate_cell(const Kernel& kernel, double p, double theta, int n) {
  const int d = kernel.dim();
  const double h = 1.0 / n;
  const int center = (n - 1) / 2;
  // Bounded integrands use the plain periodic midpoint rule (spectrally
  // accurate for smooth kernels); the node at the origin takes the limit value.
  const bool bounded = kernel.force_singularity_exponent() == 0.0 &&
                       kernel.potential_singularity() == PotentialSingularity::kBounded;
  const int block = bounded ? -1 : std::max(1, n / 8);
  NormIntegrals out = bounded ? NormIntegrals{} : central_block(kernel, p, theta, (block + 0.5) * h);
  int total = 1;
  for (int c = 0; c < d; ++c) total *= n;
  const double vol = std::pow(h, d);
  double lp = 0.0, ex = 0.0;
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    bool inside = true;
    double x[kMaxDim] = {0.0, 0.0, 0.0};
    for (int c = 0; c < d; ++c) {
      const int i = rem % n;
      rem /= n;
      inside = inside && std::abs(i - center) <= block;
      x[c] = (i - center) * h;
    }
    if (inside) continue;
    if (bounded && x[0] == 0.0) x[0] = 1e-150;
    double k[kMaxDim];
    kernel.force_unchecked(x, k);
    double kn2 = 0.0;
    for (int c = 0; c < d; ++c) kn2 += k[c] * k[c];
    lp += std::pow(kn2, 0.5 * p);
    ex += std::exp(theta * kernel.potential_unchecked(x));
  }
  out.lp_power += vol * lp;
  out.exp_phi += vol * ex;
  return out;
}

}  // namespace

KernelNormReport estimate_kernel_norms(const Kernel& kernel, double p, double theta, int resolution) {
  if (!(p > 1.0)) throw ConfigError("L^p exponent must exceed 1");
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (resolution < 16) throw ConfigError("resolution must be at least 16");
  const int d = kernel.dim();
  const double a = kernel.force_singularity_exponent();
  if (a * p >= d)
    throw DivergentIntegral("|K|^p ~ |x|^-" + std::to_string(a * p) + " is not integrable in dimension " +
                            std::to_string(d));
  switch (kernel.potential_singularity()) {
    case PotentialSingularity::kPower:
      throw DivergentIntegral("exp(theta phi) is not integrable for a power-law singular potential");
    case PotentialSingularity::kLogarithmic:
      if (theta * kernel.log_coefficient() >= d)
        throw DivergentIntegral("exp(theta phi) ~ |x|^-theta*strength is not integrable");
      break;
    case PotentialSingularity::kBounded:
      break;
  }
  const int n1 = resolution | 1;
  const int n2 = (n1 / 2) | 1;
  const auto fine = integrate_cell(kernel, p, theta, n1);
  const auto coarse = integrate_cell(kernel, p, theta, n2);

  KernelNormReport rep;
  rep.p_exponent = p;
  rep.theta_exp = theta;
  rep.resolution = n1;
  rep.lp_norm = std::pow(std::max(fine.lp_power, 0.0), 1.0 / p);
  rep.exp_phi_integral = fine.exp_phi;
  rep.lp_quadrature_error = std::abs(rep.lp_norm - std::pow(std::max(coarse.lp_power, 0.0), 1.0 / p));
  rep.exp_quadrature_error = std::abs(fine.exp_phi - coarse.exp_phi);
  rep.quadrature_error = std::max(rep.lp_quadrature_error, rep.exp_quadrature_error);
  return rep;
}

}  // namespace meanfield
