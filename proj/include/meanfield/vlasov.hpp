#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "meanfield/grid.hpp"
#include "meanfield/kernel.hpp"

namespace meanfield {

/// f(x, v) on [0,1) x [-v_max, v_max), cell-centered, x-major:
/// f[i * nv + j] at x = (i + 1/2)/nx, v = -v_max + (j + 1/2) dv.
struct PhaseGrid1D {
  int nx = 128;
  int nv = 128;
  double v_max = 6.0;
  std::vector<double> f;
  double time = 0.0;

  double dx() const noexcept { return 1.0 / nx; }
  double dv() const noexcept { return 2.0 * v_max / nv; }
  double x_center(int i) const noexcept { return (i + 0.5) / nx; }
  double v_center(int j) const noexcept { return -v_max + (j + 0.5) * dv(); }
  double mass() const;
  std::vector<double> density() const;  // rho(x) = int f dv
};

/// f(x) on [0,1)^d, cell-centered, row-major over (x_1, ..., x_d).
struct SpatialGrid {
  int n = 64;
  int d = 1;
  std::vector<double> f;
  double time = 0.0;

  size_t size() const;
  double cell_volume() const;
  double mass() const;
};

struct SolverReport {
  int steps = 0;
  double mass_initial = 0.0;
  double mass_final = 0.0;
  /// |mass_final - mass_initial| / mass_initial / t_end.
  double mass_drift_per_time = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  std::vector<std::string> warnings;
};

void to_json(Json& j, const SolverReport& r);

/// Self-consistent field (K * rho)(x) on a periodic grid with n points per
/// axis, returned component-major (d blocks of n^d values). Coulomb and
/// smooth kernels use their Fourier symbol; mild_power convolves the kernel
/// sampled on the grid (with K(0) = 0).
std::vector<double> field_from_density(const std::vector<double>& rho, int n, int d, const Kernel& kernel);

/// How the x-transport substep of the kinetic solver shifts rows.
enum class XTransport { kSpectral, kCubicSpline };

struct VpfpOptions {
  XTransport x_transport = XTransport::kSpectral;
  /// Optional callback after each step (time, state).
  std::function<void(const PhaseGrid1D&)> observer;
};

/// Strang-split kinetic Vlasov-Fokker-Planck solver in d = 1:
/// half x-transport (exact spectral shift by default), then [half v-diffusion, field solve + v-transport by a
/// periodic cubic-spline shift, half v-diffusion], then half x-transport.
/// Velocity diffusion is Crank-Nicolson with zero flux at +-v_max.
/// Throws CFLViolation when max|v| dt > dx or max|E| dt > dv.
PhaseGrid1D solve_vpfp_1d(const PhaseGrid1D& f0, const Kernel& kernel, double sigma, double t_end, double dt,
                          SolverReport* report = nullptr, const VpfpOptions& options = {});

/// First-order McKean-Vlasov equation in continuity form,
/// d_t f + div((K * f) f) = sigma^2/2 Laplace f, d in {1, 2}: Strang split
/// into conservative central-flux finite-volume advection (Heun) and exact
/// spectral diffusion. Throws CFLViolation when max|K * f| dt > dx.
SpatialGrid solve_first_order(const SpatialGrid& f0, const Kernel& kernel, double sigma, double t_end, double dt,
                              SolverReport* report = nullptr);

/// Product density on the k-fold grid. With `target`, the solution is first
/// averaged onto coarser aligned cells (v_bins = 0 integrates out v);
/// GridMismatch if the grids are not aligned.
GridDensity tensorize(const PhaseGrid1D& f, int k, const std::optional<GridSpec>& target = std::nullopt);
GridDensity tensorize(const SpatialGrid& f, int k, const std::optional<GridSpec>& target = std::nullopt);

/// (1 + eps cos(2 pi m x)) * N(0, s^2)(v), normalized to unit discrete mass.
PhaseGrid1D landau_initial(int nx, int nv, double v_max, double s, double eps, int mode);
/// 1 + eps cos(2 pi m x_1), normalized to unit discrete mass.
SpatialGrid cosine_initial(int n, int d, double eps, int mode);

void write_phase_grid(const std::filesystem::path& path, const PhaseGrid1D& f);
PhaseGrid1D read_phase_grid(const std::filesystem::path& path);
void write_spatial_grid(const std::filesystem::path& path, const SpatialGrid& f);
SpatialGrid read_spatial_grid(const std::filesystem::path& path);

}  // namespace meanfield
