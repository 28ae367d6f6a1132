#include "meanfield/vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"
#include "meanfield/errors.hpp"

namespace meanfield {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

int signed_mode(int k, int n) { return k <= n / 2 ? k : k - n; }

size_t ipow(size_t b, int e) {
  size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

double cubic_bspline(double t) {
  t = std::abs(t);
  if (t < 1.0) return 2.0 / 3.0 - t * t + 0.5 * t * t * t;
  if (t < 2.0) {
    const double u = 2.0 - t;
    return u * u * u / 6.0;
  }
  return 0.0;
}

/// Spectral multiplier that shifts a periodic row of n samples by `s` cells
/// (g_i = f(i - s)) through the interpolating periodic cubic spline.
void spline_shift_symbol(int n, double s, std::vector<cplx>& out) {
  const double n0 = std::floor(s);
  const double theta = s - n0;
  double w[4];
  for (int l = -1; l <= 2; ++l) w[l + 1] = cubic_bspline(l - theta);
  out.resize(size_t(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    const double om = 2.0 * kPi * k / n;
    cplx acc = 0.0;
    for (int l = -1; l <= 2; ++l) acc += w[l + 1] * std::polar(1.0, -om * (n0 + l));
    const double b = (4.0 + 2.0 * std::cos(om)) / 6.0;
    out[size_t(k)] = acc / b;
  }
}

/// Exact band-limited shift by s cells. The Nyquist mode keeps only its real
/// part so the result stays real.
void spectral_shift_symbol(int n, double s, std::vector<cplx>& out) {
  out.resize(size_t(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) out[size_t(k)] = std::polar(1.0, -2.0 * kPi * k * s / n);
  if (n % 2 == 0) out[size_t(n / 2)] = std::cos(kPi * s);
}

class RowShifter {
 public:
  explicit RowShifter(int n) : n_(n), fft_({n}), spec_(size_t(n / 2 + 1)) {}

  void shift(double* row, const std::vector<cplx>& symbol) {
    fft_.forward(row, spec_.data());
    for (size_t k = 0; k < spec_.size(); ++k) spec_[k] *= symbol[k];
    fft_.inverse(spec_.data(), row);
    for (int i = 0; i < n_; ++i) row[i] /= n_;
  }

 private:
  int n_;
  detail::RealFft fft_;
  std::vector<cplx> spec_;
};

/// Convolution with K on an n^d periodic grid via precomputed multipliers.
class FieldOperator {
 public:
  FieldOperator(int n, int d, const Kernel& kernel) : n_(n), d_(d), fft_(std::vector<int>(size_t(d), n)) {
    if (kernel.dim() != d) throw ConfigError("kernel dimension does not match the grid");
    const size_t cs = fft_.complex_size();
    const size_t rs = fft_.real_size();
    const int half = n / 2 + 1;
    mult_.assign(size_t(d), std::vector<cplx>(cs, 0.0));
    if (kernel.has_analytic_symbol()) {
      int k[3] = {0, 0, 0};
      for (size_t idx = 0; idx < cs; ++idx) {
        size_t rem = idx;
        bool nyquist = false;
        for (int a = d - 1; a >= 0; --a) {
          const int extent = a == d - 1 ? half : n;
          const int raw = int(rem % size_t(extent));
          rem /= size_t(extent);
          k[a] = signed_mode(raw, n);
          if (n % 2 == 0 && raw == n / 2) nyquist = true;
        }
        if (nyquist) continue;
        for (int c = 0; c < d; ++c) mult_[size_t(c)][idx] = kernel.force_symbol(std::span<const int>(k, size_t(d)), c) / double(rs);
      }
    } else {
      // Discrete convolution with K sampled at grid displacements, K(0) = 0.
      std::vector<std::vector<double>> sampled(size_t(d), std::vector<double>(rs, 0.0));
      double r[3] = {0, 0, 0}, out[3];
      for (size_t idx = 1; idx < rs; ++idx) {
        size_t rem = idx;
        for (int a = d - 1; a >= 0; --a) {
          const int m = int(rem % size_t(n));
          rem /= size_t(n);
          r[a] = double(signed_mode(m, n)) / n;
          if (m == n / 2 && n % 2 == 0) r[a] = -0.5;
        }
        kernel.force_unchecked(r, out);
        for (int c = 0; c < d; ++c) sampled[size_t(c)][idx] = out[c];
      }
      const double scale = 1.0 / (double(rs) * double(rs));
      for (int c = 0; c < d; ++c) {
        fft_.forward(sampled[size_t(c)].data(), mult_[size_t(c)].data());
        for (auto& v : mult_[size_t(c)]) v *= scale;
      }
    }
    spec_.resize(cs);
    work_.resize(cs);
  }

  /// Writes d component blocks of n^d values into `field`.
  void apply(const double* rho, std::vector<double>& field) {
    const size_t rs = fft_.real_size();
    field.resize(size_t(d_) * rs);
    fft_.forward(rho, spec_.data());
    for (int c = 0; c < d_; ++c) {
      const auto& m = mult_[size_t(c)];
      for (size_t i = 0; i < spec_.size(); ++i) work_[i] = spec_[i] * m[i];
      fft_.inverse(work_.data(), field.data() + size_t(c) * rs);
    }
  }

 private:
  int n_;
  int d_;
  detail::RealFft fft_;
  std::vector<std::vector<cplx>> mult_;
  std::vector<cplx> spec_, work_;
};

/// Crank-Nicolson step of a = (sigma^2/2) d_vv with zero-flux ends over a
/// time tau, applied in place to one velocity row.
class VelocityDiffusion {
 public:
  VelocityDiffusion(int nv, double sigma, double dv, double tau) : nv_(nv) {
    const double a = 0.5 * sigma * sigma / (dv * dv);
    r_ = 0.5 * tau * a;
    lower_.assign(size_t(nv), -r_);
    diag_.assign(size_t(nv), 1.0 + 2.0 * r_);
    upper_.assign(size_t(nv), -r_);
    diag_[0] = diag_[size_t(nv - 1)] = 1.0 + r_;
    lower_[0] = upper_[size_t(nv - 1)] = 0.0;
    cp_.resize(size_t(nv));
    rhs_.resize(size_t(nv));
  }

  void apply(double* f) {
    if (r_ == 0.0) return;
    const int n = nv_;
    for (int j = 0; j < n; ++j) {
      const double left = j > 0 ? f[j - 1] - f[j] : 0.0;
      const double right = j < n - 1 ? f[j + 1] - f[j] : 0.0;
      rhs_[size_t(j)] = f[j] + r_ * (left + right);
    }
    // Thomas algorithm
    cp_[0] = upper_[0] / diag_[0];
    rhs_[0] /= diag_[0];
    for (int j = 1; j < n; ++j) {
      const double m = diag_[size_t(j)] - lower_[size_t(j)] * cp_[size_t(j - 1)];
      cp_[size_t(j)] = upper_[size_t(j)] / m;
      rhs_[size_t(j)] = (rhs_[size_t(j)] - lower_[size_t(j)] * rhs_[size_t(j - 1)]) / m;
    }
    f[n - 1] = rhs_[size_t(n - 1)];
    for (int j = n - 2; j >= 0; --j) f[j] = rhs_[size_t(j)] - cp_[size_t(j)] * f[j + 1];
  }

 private:
  int nv_;
  double r_ = 0.0;
  std::vector<double> lower_, diag_, upper_, cp_, rhs_;
};

int step_count(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be non-negative");
  const double steps = std::round(t_end / dt);
  if (std::abs(steps * dt - t_end) > 1e-9 * std::max(1.0, t_end))
    throw ConfigError("t_end must be an integer multiple of dt");
  return int(steps);
}

void check_finite_and_range(const std::vector<double>& f, SolverReport& rep) {
  double lo = f.empty() ? 0.0 : f[0], hi = lo;
  for (double v : f) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in PDE solution");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  rep.min_value = std::min(rep.min_value, lo);
  rep.max_value = std::max(rep.max_value, hi);
}

void finish_report(SolverReport& rep, double mass_final, double t_end) {
  rep.mass_final = mass_final;
  const double drift = std::abs(rep.mass_final - rep.mass_initial) / std::abs(rep.mass_initial);
  rep.mass_drift_per_time = t_end > 0.0 ? drift / t_end : drift;
  if (rep.min_value < -1e-6 * rep.max_value)
    rep.warnings.push_back("NegativeOvershoot: minimum " + format_double(rep.min_value) + " against maximum " +
                           format_double(rep.max_value));
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be non-negative");
}

GridDensity product_density(const GridSpec& slot, std::vector<double> base, int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  GridSpec spec = slot;
  spec.k = k;
  validate(spec);
  std::vector<double> values = base;
  for (int s = 1; s < k; ++s) {
    std::vector<double> next(values.size() * base.size());
    for (size_t a = 0; a < values.size(); ++a)
      for (size_t b = 0; b < base.size(); ++b) next[a * base.size() + b] = values[a] * base[b];
    values = std::move(next);
  }
  GridDensity out;
  out.spec = spec;
  out.values = std::move(values);
  return out;
}

int coarsening(int fine, int coarse, const char* axis) {
  if (coarse <= 0 || fine % coarse != 0)
    throw GridMismatch(std::string("target ") + axis + " bins do not align with the solution grid");
  return fine / coarse;
}

}  // namespace

double PhaseGrid1D::mass() const {
  double s = 0.0;
  for (double v : f) s += v;
  return s * dx() * dv();
}

std::vector<double> PhaseGrid1D::density() const {
  std::vector<double> rho(size_t(nx), 0.0);
  for (int i = 0; i < nx; ++i) {
    double s = 0.0;
    for (int j = 0; j < nv; ++j) s += f[size_t(i) * size_t(nv) + size_t(j)];
    rho[size_t(i)] = s * dv();
  }
  return rho;
}

size_t SpatialGrid::size() const { return ipow(size_t(n), d); }
double SpatialGrid::cell_volume() const { return std::pow(1.0 / n, d); }
double SpatialGrid::mass() const {
  double s = 0.0;
  for (double v : f) s += v;
  return s * cell_volume();
}

void to_json(Json& j, const SolverReport& r) {
  j = Json{{"steps", r.steps},
           {"mass_initial", r.mass_initial},
           {"mass_final", r.mass_final},
           {"mass_drift_per_time", r.mass_drift_per_time},
           {"min_value", r.min_value},
           {"max_value", r.max_value},
           {"warnings", r.warnings}};
}

std::vector<double> field_from_density(const std::vector<double>& rho, int n, int d, const Kernel& kernel) {
  if (d < 1 || d > 3) throw ConfigError("dimension must be 1, 2 or 3");
  if (n < 4) throw GridTooCoarse("field grid needs at least 4 points per axis");
  if (rho.size() != ipow(size_t(n), d)) throw GridMismatch("density size does not match the grid");
  FieldOperator op(n, d, kernel);
  std::vector<double> field;
  op.apply(rho.data(), field);
  return field;
}

PhaseGrid1D solve_vpfp_1d(const PhaseGrid1D& f0, const Kernel& kernel, double sigma, double t_end, double dt,
                          SolverReport* report, const VpfpOptions& options) {
  if (f0.nx < 4 || f0.nv < 4) throw GridTooCoarse("phase grid needs at least 4 cells per axis");
  if (!(f0.v_max > 0.0)) throw ConfigError("v_max must be positive");
  if (f0.f.size() != size_t(f0.nx) * size_t(f0.nv)) throw GridMismatch("phase grid values do not match nx * nv");
  if (kernel.dim() != 1) throw ConfigError("the kinetic solver is one-dimensional");
  check_sigma(sigma);
  const int steps = step_count(t_end, dt);
  const int nx = f0.nx, nv = f0.nv;
  const double dx = f0.dx(), dv = f0.dv();
  const double v_edge = f0.v_max - 0.5 * dv;
  if (v_edge * dt > dx * (1.0 + 1e-12))
    throw CFLViolation("max|v| dt = " + format_double(v_edge * dt) + " exceeds dx = " + format_double(dx));

  PhaseGrid1D f = f0;
  SolverReport rep;
  rep.mass_initial = f.mass();
  rep.min_value = rep.max_value = f.f.empty() ? 0.0 : f.f[0];
  check_finite_and_range(f.f, rep);

  // x-transport symbols depend only on the velocity row, so precompute them.
  std::vector<std::vector<cplx>> x_symbols{static_cast<size_t>(nv)};
  for (int j = 0; j < nv; ++j) {
    const double s = f.v_center(j) * 0.5 * dt / dx;
    if (options.x_transport == XTransport::kSpectral)
      spectral_shift_symbol(nx, s, x_symbols[size_t(j)]);
    else
      spline_shift_symbol(nx, s, x_symbols[size_t(j)]);
  }
  RowShifter x_shift(nx), v_shift(nv);
  VelocityDiffusion diffusion(nv, sigma, dv, 0.5 * dt);
  FieldOperator field_op(nx, 1, kernel);
  const bool interacting = kernel.family() != KernelFamily::kZero;
  std::vector<double> column(static_cast<size_t>(nx)), field;
  std::vector<cplx> v_symbol;

  auto transport_x = [&] {
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nx; ++i) column[size_t(i)] = f.f[size_t(i) * size_t(nv) + size_t(j)];
      x_shift.shift(column.data(), x_symbols[size_t(j)]);
      for (int i = 0; i < nx; ++i) f.f[size_t(i) * size_t(nv) + size_t(j)] = column[size_t(i)];
    }
  };

  for (int n = 0; n < steps; ++n) {
    transport_x();
    for (int i = 0; i < nx; ++i) diffusion.apply(f.f.data() + size_t(i) * size_t(nv));
    if (interacting) {
      const auto rho = f.density();
      field_op.apply(rho.data(), field);
      double emax = 0.0;
      for (double e : field) emax = std::max(emax, std::abs(e));
      if (emax * dt > dv * (1.0 + 1e-12))
        throw CFLViolation("max|E| dt = " + format_double(emax * dt) + " exceeds dv = " + format_double(dv));
      for (int i = 0; i < nx; ++i) {
        spline_shift_symbol(nv, field[size_t(i)] * dt / dv, v_symbol);
        v_shift.shift(f.f.data() + size_t(i) * size_t(nv), v_symbol);
      }
    }
    for (int i = 0; i < nx; ++i) diffusion.apply(f.f.data() + size_t(i) * size_t(nv));
    transport_x();
    f.time = f0.time + (n + 1) * dt;
    check_finite_and_range(f.f, rep);
    if (options.observer) options.observer(f);
  }
  rep.steps = steps;
  finish_report(rep, f.mass(), t_end);
  if (report) *report = rep;
  return f;
}

SpatialGrid solve_first_order(const SpatialGrid& f0, const Kernel& kernel, double sigma, double t_end, double dt,
                              SolverReport* report) {
  if (f0.d != 1 && f0.d != 2) throw ConfigError("the first-order solver supports d = 1 and d = 2");
  if (f0.n < 4) throw GridTooCoarse("spatial grid needs at least 4 cells per axis");
  if (f0.f.size() != f0.size()) throw GridMismatch("spatial grid values do not match n^d");
  if (kernel.dim() != f0.d) throw ConfigError("kernel dimension does not match the grid");
  check_sigma(sigma);
  const int steps = step_count(t_end, dt);
  const int n = f0.n, d = f0.d;
  const size_t total = f0.size();
  const double h = 1.0 / n;

  SpatialGrid f = f0;
  SolverReport rep;
  rep.mass_initial = f.mass();
  rep.min_value = rep.max_value = f.f.empty() ? 0.0 : f.f[0];
  check_finite_and_range(f.f, rep);

  FieldOperator field_op(n, d, kernel);
  detail::RealFft fft(std::vector<int>(size_t(d), n));
  std::vector<cplx> spec(fft.complex_size());

  // exact heat semigroup over dt
  std::vector<double> heat(fft.complex_size(), 1.0);
  {
    const int half = n / 2 + 1;
    for (size_t idx = 0; idx < heat.size(); ++idx) {
      size_t rem = idx;
      double k2 = 0.0;
      for (int a = d - 1; a >= 0; --a) {
        const int extent = a == d - 1 ? half : n;
        const int k = signed_mode(int(rem % size_t(extent)), n);
        rem /= size_t(extent);
        k2 += double(k) * k;
      }
      heat[idx] = std::exp(-0.5 * sigma * sigma * 4.0 * kPi * kPi * k2 * dt) / double(total);
    }
  }
  const bool interacting = kernel.family() != KernelFamily::kZero;
  std::vector<double> field, k1(total), k2(total), stage(total);

  // -div(E f) with central face fluxes
  auto rate = [&](const std::vector<double>& g, std::vector<double>& out) {
    field_op.apply(g.data(), field);
    double emax = 0.0;
    for (double e : field) emax = std::max(emax, std::abs(e));
    if (emax * dt > h * (1.0 + 1e-12))
      throw CFLViolation("max|K * f| dt = " + format_double(emax * dt) + " exceeds dx = " + format_double(h));
    std::fill(out.begin(), out.end(), 0.0);
    for (int a = 0; a < d; ++a) {
      const size_t stride = a == d - 1 ? 1 : size_t(n);
      const double* E = field.data() + size_t(a) * total;
      for (size_t c = 0; c < total; ++c) {
        const size_t along = (c / stride) % size_t(n);
        const size_t next = along + 1 == size_t(n) ? c - (size_t(n) - 1) * stride : c + stride;
        const double flux = 0.25 * (E[c] + E[next]) * (g[c] + g[next]);
        out[c] -= flux / h;
        out[next] += flux / h;
      }
    }
  };
  auto advect = [&](double tau) {
    rate(f.f, k1);
    for (size_t c = 0; c < total; ++c) stage[c] = f.f[c] + tau * k1[c];
    rate(stage, k2);
    for (size_t c = 0; c < total; ++c) f.f[c] += 0.5 * tau * (k1[c] + k2[c]);
  };

  for (int s = 0; s < steps; ++s) {
    if (interacting) advect(0.5 * dt);
    if (sigma > 0.0) {
      fft.forward(f.f.data(), spec.data());
      for (size_t i = 0; i < spec.size(); ++i) spec[i] *= heat[i];
      fft.inverse(spec.data(), f.f.data());
    }
    if (interacting) advect(0.5 * dt);
    f.time = f0.time + (s + 1) * dt;
    check_finite_and_range(f.f, rep);
  }
  rep.steps = steps;
  finish_report(rep, f.mass(), t_end);
  if (report) *report = rep;
  return f;
}

GridDensity tensorize(const PhaseGrid1D& f, int k, const std::optional<GridSpec>& target) {
  GridSpec slot{1, 1, f.nx, f.nv, f.v_max};
  std::vector<double> base = f.f;
  if (target) {
    if (target->d != 1) throw GridMismatch("phase grid is one-dimensional");
    const int cx = coarsening(f.nx, target->x_bins, "x");
    if (target->has_velocity()) {
      if (std::abs(target->v_max - f.v_max) > 1e-12 * f.v_max) throw GridMismatch("velocity boxes differ");
      const int cv = coarsening(f.nv, target->v_bins, "v");
      slot = GridSpec{1, 1, target->x_bins, target->v_bins, f.v_max};
      base.assign(slot.slot_cells(), 0.0);
      for (int i = 0; i < f.nx; ++i)
        for (int j = 0; j < f.nv; ++j)
          base[size_t(i / cx) * size_t(slot.v_bins) + size_t(j / cv)] +=
              f.f[size_t(i) * size_t(f.nv) + size_t(j)] / double(cx * cv);
    } else {
      slot = GridSpec{1, 1, target->x_bins, 0, target->v_max};
      base.assign(slot.slot_cells(), 0.0);
      const auto rho = f.density();
      for (int i = 0; i < f.nx; ++i) base[size_t(i / cx)] += rho[size_t(i)] / double(cx);
    }
  }
  auto out = product_density(slot, std::move(base), k);
  out.time = f.time;
  out.provenance = Json{{"source", "kinetic_pde"}, {"nx", f.nx}, {"nv", f.nv}};
  return out;
}

GridDensity tensorize(const SpatialGrid& f, int k, const std::optional<GridSpec>& target) {
  GridSpec slot{1, f.d, f.n, 0, 1.0};
  std::vector<double> base = f.f;
  if (target) {
    if (target->d != f.d) throw GridMismatch("target dimension differs from the solution");
    if (target->has_velocity()) throw GridMismatch("first-order solutions have no velocity axes");
    const int cx = coarsening(f.n, target->x_bins, "x");
    slot = GridSpec{1, f.d, target->x_bins, 0, target->v_max};
    base.assign(slot.slot_cells(), 0.0);
    const double w = 1.0 / std::pow(double(cx), f.d);
    for (size_t c = 0; c < f.f.size(); ++c) {
      size_t rem = c, coarse = 0, scale = 1;
      for (int a = f.d - 1; a >= 0; --a) {
        const size_t idx = rem % size_t(f.n);
        rem /= size_t(f.n);
        coarse += (idx / size_t(cx)) * scale;
        scale *= size_t(slot.x_bins);
      }
      base[coarse] += f.f[c] * w;
    }
  }
  auto out = product_density(slot, std::move(base), k);
  out.time = f.time;
  out.provenance = Json{{"source", "first_order_pde"}, {"n", f.n}};
  return out;
}

PhaseGrid1D landau_initial(int nx, int nv, double v_max, double s, double eps, int mode) {
  if (!(s > 0.0)) throw ConfigError("velocity spread must be positive");
  if (std::abs(eps) >= 1.0) throw ConfigError("perturbation must satisfy |eps| < 1");
  if (nx < 4 || nv < 4) throw GridTooCoarse("phase grid needs at least 4 cells per axis");
  PhaseGrid1D g;
  g.nx = nx;
  g.nv = nv;
  g.v_max = v_max;
  g.f.resize(size_t(nx) * size_t(nv));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nv; ++j) {
      const double v = g.v_center(j);
      g.f[size_t(i) * size_t(nv) + size_t(j)] =
          (1.0 + eps * std::cos(2.0 * kPi * mode * g.x_center(i))) * std::exp(-v * v / (2.0 * s * s));
    }
  const double m = g.mass();
  for (double& v : g.f) v /= m;
  return g;
}

SpatialGrid cosine_initial(int n, int d, double eps, int mode) {
  if (d < 1 || d > 2) throw ConfigError("the first-order solver supports d = 1 and d = 2");
  if (std::abs(eps) >= 1.0) throw ConfigError("perturbation must satisfy |eps| < 1");
  if (n < 4) throw GridTooCoarse("spatial grid needs at least 4 cells per axis");
  SpatialGrid g;
  g.n = n;
  g.d = d;
  g.f.resize(g.size());
  const size_t inner = g.size() / size_t(n);
  for (size_t c = 0; c < g.f.size(); ++c) {
    const double x1 = (double(c / inner) + 0.5) / n;
    g.f[c] = 1.0 + eps * std::cos(2.0 * kPi * mode * x1);
  }
  const double m = g.mass();
  for (double& v : g.f) v /= m;
  return g;
}

void write_phase_grid(const std::filesystem::path& path, const PhaseGrid1D& f) {
  Tensor t;
  t.header = {{"kind", "phase_grid_1d"}, {"nx", f.nx}, {"nv", f.nv}, {"v_max", f.v_max}, {"time", f.time}};
  t.shape = {size_t(f.nx), size_t(f.nv)};
  t.values = f.f;
  write_tensor(path, t);
}

PhaseGrid1D read_phase_grid(const std::filesystem::path& path) {
  const auto t = read_tensor(path);
  if (t.header.value("kind", "") != "phase_grid_1d") throw ConfigError(path.string() + " is not a phase grid");
  PhaseGrid1D f;
  f.nx = t.header.at("nx");
  f.nv = t.header.at("nv");
  f.v_max = t.header.at("v_max");
  f.time = t.header.value("time", 0.0);
  f.f = t.values;
  if (f.f.size() != size_t(f.nx) * size_t(f.nv)) throw GridMismatch("phase grid payload size mismatch");
  return f;
}

void write_spatial_grid(const std::filesystem::path& path, const SpatialGrid& f) {
  Tensor t;
  t.header = {{"kind", "spatial_grid"}, {"n", f.n}, {"d", f.d}, {"time", f.time}};
  t.shape.assign(size_t(f.d), size_t(f.n));
  t.values = f.f;
  write_tensor(path, t);
}

SpatialGrid read_spatial_grid(const std::filesystem::path& path) {
  const auto t = read_tensor(path);
  if (t.header.value("kind", "") != "spatial_grid") throw ConfigError(path.string() + " is not a spatial grid");
  SpatialGrid f;
  f.n = t.header.at("n");
  f.d = t.header.at("d");
  f.time = t.header.value("time", 0.0);
  f.f = t.values;
  if (f.f.size() != f.size()) throw GridMismatch("spatial grid payload size mismatch");
  return f;
}

}  // namespace meanfield
