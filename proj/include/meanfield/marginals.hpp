#pragma once

#include <vector>

#include "meanfield/ensemble.hpp"
#include "meanfield/grid.hpp"
#include "meanfield/kernel.hpp"

namespace meanfield {

/// Largest number of ordered pairs drawn per replica for k = 2.
inline constexpr size_t kMaxPairTuples = 4096;

/// Ordered index pairs (i, j), i != j, used for the k=2 histogram of an
/// N-particle configuration: all N(N-1) pairs when that is at most 4096,
/// otherwise t = 0..4095 with i = t mod N and j = i + 1 + (t div N) mod (N-1).
std::vector<std::pair<int, int>> pair_tuples(int N);

/// Histogram estimate of the k-particle marginal at a snapshot time, pooled
/// over replicas and the tuple family above.
GridDensity estimate_marginal(const EnsembleDataset& ds, int k, double time, const GridSpec& grid);

/// Integrates a k=2 density over the second slot. For a histogram from
/// estimate_marginal this equals the k=1 estimate exactly when the tuple family
/// is balanced over first indices and no velocity falls outside the box.
GridDensity first_slot_marginal(const GridDensity& f);

/// Product density f (x) f on the k=2 grid.
GridDensity tensor_square(const GridDensity& f);

struct WeightedNormReport {
  double q = 2.0;
  double lambda = 0.0;
  double value = 0.0;            // sum |f|^q exp(lambda e_k) * cell volume
  double gaussian_moment = 0.0;  // sum exp(beta sum |v_i|^2) f * cell volume
  double beta = 0.0;
  double truncation_mass = 0.0;
};

void to_json(Json& j, const WeightedNormReport& r);

/// e_k at a cell: sum_i (1 + |v_i|^2) + (1/N) sum_{i != j} phi(x_i - x_j)
/// at cell centers. N = 0 drops the pair term (the N -> infinity limit);
/// for k = 1 the pair term vanishes by phi(0) = 0.
double cell_energy(const GridSpec& g, size_t cell, const Kernel* kernel, int N);

/// Midpoint quadrature of |f|^q exp(lambda e_k). `beta` < 0 reuses lambda
/// for the Gaussian moment. Throws WeightOverflow if an exponent on an
/// occupied cell exceeds the double range.
WeightedNormReport weighted_lq_norm(const GridDensity& f, double q, double lambda, const Kernel* kernel, int N,
                                    double beta = -1.0);

double gaussian_moment(const GridDensity& f, double beta);

/// |K| sampled on the x-grid of a GridSpec: index (i_1..i_d) holds
/// |K(i h)| with the displacement wrapped to [-1/2, 1/2).
std::vector<double> kernel_magnitude_grid(const Kernel& kernel, int x_bins);

struct HolderReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double kernel_norm = 0.0;
  double density_norm = 0.0;
  bool satisfied = false;
};

void to_json(Json& j, const HolderReport& r);

/// Discrete check of || int K(x_1 - x_{k+1}) f dz_{k+1} ||_q <= ||K||_p ||f||_q
/// for a density of order k+1 (here k = 1). When the grid has velocity axes
/// the velocity box of measure V = (2 v_max)^d enters the right side as
/// V^{1 - 1/q}, which is what the inequality needs on a bounded box.
/// p = infinity is accepted (max norm). Throws ExponentViolation if
/// 1/p + 1/q > 1.
HolderReport holder_check(const std::vector<double>& kernel_grid, const GridDensity& f, double p, double q);

struct ChaosDistance {
  double l1 = 0.0;
  double lq = 0.0;
  double weighted_lq = 0.0;
};

void to_json(Json& j, const ChaosDistance& c);

/// Grid distances between two densities on identical grids (GridMismatch
/// otherwise). The weighted distance uses exp(lambda e_k) with `kernel`/N as
/// in weighted_lq_norm.
ChaosDistance chaos_distance(const GridDensity& empirical, const GridDensity& reference, double q = 2.0,
                             double lambda = 0.0, const Kernel* kernel = nullptr, int N = 0);

}  // namespace meanfield
