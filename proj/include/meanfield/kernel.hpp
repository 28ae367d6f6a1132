#pragma once

#include <array>
#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meanfield/io.hpp"
#include "meanfield/torus.hpp"

namespace meanfield {

enum class KernelFamily { kCoulomb, kMildPower, kSmoothFourier, kZero };

std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& s);

/// One cosine term `amplitude * cos(2 pi m.x)` of a smooth potential.
struct FourierMode {
  std::array<int, kMaxDim> wavevector{};
  double amplitude = 0.0;
  bool operator==(const FourierMode&) const = default;
};

/// Description of a repulsive pair interaction on the unit torus.
///
/// The potential phi is even and the force is K = -grad phi. Families:
///  - coulomb:        K = strength * x/|x|^d + smooth periodizing correction
///                    (closed form for d=1, Ewald split for d=2,3);
///  - mild_power:     |K| = strength * |x|^-power near the origin, cut off
///                    smoothly inside the unit cell;
///  - smooth_fourier: phi = strength * sum_m a_m cos(2 pi m.x);
///  - zero:           no interaction.
struct KernelSpec {
  KernelFamily family = KernelFamily::kZero;
  double strength = 1.0;
  int dim = 1;
  double power = 0.5;
  std::vector<FourierMode> modes;
  /// Real-space image shells of the Ewald sum.
  int image_shells = 2;
  /// Largest |k_i| kept in the Ewald reciprocal sum.
  int fourier_cutoff = 8;
  /// Grid intervals per unit length of the tabulated Coulomb correction
  /// (-1: automatic, 0: always evaluate the Ewald sum directly).
  int table_resolution = -1;
  /// Additive shift making phi >= 0. Computed when absent.
  std::optional<double> potential_shift;

  bool operator==(const KernelSpec&) const = default;
};

void to_json(Json& j, const KernelSpec& s);
void from_json(const Json& j, KernelSpec& s);
void to_json(Json& j, const FourierMode& m);
void from_json(const Json& j, FourierMode& m);

/// How the potential behaves at the origin.
enum class PotentialSingularity { kBounded, kLogarithmic, kPower };

class CorrectionTable;

/// A KernelSpec compiled for evaluation: validates it, builds the
/// Coulomb correction table when needed and fixes the positivity shift.
/// Immutable after construction; safe to share between threads.
class Kernel {
 public:
  explicit Kernel(KernelSpec spec);

  const KernelSpec& spec() const noexcept { return spec_; }
  int dim() const noexcept { return spec_.dim; }
  KernelFamily family() const noexcept { return spec_.family; }
  double shift() const noexcept { return shift_; }
  const std::string& hash() const noexcept { return hash_; }

  /// Shifted potential at a displacement (wrapped to the minimum image).
  /// Returns 0 at r = 0.
  double potential(std::span<const double> r) const;
  /// K(r) = -grad phi(r); zero at r = 0.
  std::array<double, kMaxDim> force(std::span<const double> r) const;

  /// Hot-path variants: r must already lie in [-1/2, 1/2)^d.
  double potential_unchecked(const double* r) const noexcept;
  void force_unchecked(const double* r, double* out) const noexcept;

  /// Unshifted potential (no r=0 convention); used for tabulation.
  double raw_potential(const double* r) const noexcept;

  /// |K| ~ strength * |x|^-exponent near 0; 0 for bounded kernels.
  double force_singularity_exponent() const noexcept;
  PotentialSingularity potential_singularity() const noexcept;
  /// Coefficient c of the leading -c ln|x| term (logarithmic case only).
  double log_coefficient() const noexcept { return spec_.strength; }

  /// True when K-hat is known in closed form (coulomb, smooth_fourier, zero).
  bool has_analytic_symbol() const noexcept;
  /// Fourier coefficient of component `c` of K at integer wavevector k:
  /// K(x) = sum_k K-hat(k) exp(2 pi i k.x).
  std::complex<double> force_symbol(std::span<const int> k, int c) const;

  /// True when pair forces factor through a finite set of Fourier modes.
  bool is_modal() const noexcept {
    return spec_.family == KernelFamily::kSmoothFourier || spec_.family == KernelFamily::kZero;
  }

 private:
  // phi may be null when only the gradient is needed.
  void coulomb_correction(const double* r, double* phi, double* grad_out) const noexcept;

  KernelSpec spec_;
  std::string hash_;
  double shift_ = 0.0;
  double ewald_width_ = 0.0;
  std::shared_ptr<const CorrectionTable> table_;
};

/// Ewald split of the periodic Coulomb correction (singular term removed).
/// Exposed for tests and for the tabulator. Writes phi0 and K0 = -grad phi0.
void ewald_coulomb_correction(int dim, double strength, double width, int shells, int cutoff,
                              const double* r, double* phi0, double* k0);
double default_ewald_width(int shells, int cutoff);

/// Set (or clear, with an empty path) the directory used to cache tabulated
/// corrections across processes. Defaults to $MEANFIELD_KERNEL_CACHE.
void set_kernel_cache_dir(const std::string& dir);

struct KernelNormReport {
  double p_exponent = 0.0;
  double lp_norm = 0.0;
  double theta_exp = 0.0;
  double exp_phi_integral = 0.0;
  /// Richardson-style |I(n) - I(n/2)| for the L^p norm and the exp integral.
  double quadrature_error = 0.0;
  double lp_quadrature_error = 0.0;
  double exp_quadrature_error = 0.0;
  int resolution = 0;
};

void to_json(Json& j, const KernelNormReport& r);

/// Estimates ||K||_{L^p(T^d)} and int exp(theta phi) on the unit cell.
/// The cell around the origin is split into pyramids; the leading singular
/// term is integrated in closed form along rays and the rest numerically.
/// Throws DivergentIntegral when the local power counting diverges.
KernelNormReport estimate_kernel_norms(const Kernel& kernel, double p, double theta, int resolution);

}  // namespace meanfield
