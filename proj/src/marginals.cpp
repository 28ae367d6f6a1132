#include "meanfield/marginals.hpp"

#include <cmath>
#include <limits>

#include "meanfield/errors.hpp"

namespace meanfield {

namespace {

// Largest exponent accepted before exp() overflows a double.
constexpr double kMaxExponent = 709.0;

struct SlotCenter {
  double x[kMaxDim] = {0.0, 0.0, 0.0};
  double v2 = 0.0;
};

SlotCenter slot_center(const GridSpec& g, size_t cell) {
  int xi[kMaxDim] = {0, 0, 0}, vi[kMaxDim] = {0, 0, 0};
  unpack_slot_cell(g, cell, xi, vi);
  SlotCenter c;
  for (int a = 0; a < g.d; ++a) c.x[a] = g.x_center(xi[a]);
  if (g.has_velocity())
    for (int a = 0; a < g.d; ++a) {
      const double v = g.v_center(vi[a]);
      c.v2 += v * v;
    }
  return c;
}

}  // namespace

std::vector<std::pair<int, int>> pair_tuples(int N) {
  std::vector<std::pair<int, int>> out;
  if (N < 2) return out;
  const size_t all = size_t(N) * size_t(N - 1);
  if (all <= kMaxPairTuples) {
    out.reserve(all);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (i != j) out.emplace_back(i, j);
    return out;
  }
  out.reserve(kMaxPairTuples);
  for (size_t t = 0; t < kMaxPairTuples; ++t) {
    const int i = static_cast<int>(t % N);
    const int j = static_cast<int>((i + 1 + (t / N) % (N - 1)) % N);
    out.emplace_back(i, j);
  }
  return out;
}

GridDensity estimate_marginal(const EnsembleDataset& ds, int k, double time, const GridSpec& grid) {
  GridSpec g = grid;
  g.k = k;
  validate(g);
  if (g.d != ds.config.d) throw GridMismatch("grid dimension does not match the dataset");
  const bool has_vel = ds.config.order == Order::kSecond;
  if (g.has_velocity() && !has_vel) throw GridMismatch("first-order datasets have no velocities; use v_bins = 0");
  const size_t snap = ds.snapshot_index(time);
  const int n = ds.config.N, d = g.d;
  if (k == 2 && n < 2) throw ConfigError("k = 2 marginals need N >= 2");

  const auto pairs = k == 2 ? pair_tuples(n) : std::vector<std::pair<int, int>>{};
  const size_t per_replica = k == 1 ? size_t(n) : pairs.size();
  const size_t slot = g.slot_cells();
  std::vector<uint64_t> counts(g.total_cells(), 0);

#pragma omp parallel
  {
    std::vector<uint64_t> local(counts.size(), 0);
    std::vector<size_t> cell_of(n);
    std::vector<char> inside(n);
#pragma omp for schedule(static)
    for (int r = 0; r < ds.replica_count; ++r) {
      const Snapshot& s = ds.snapshots[r].at(snap);
      for (int i = 0; i < n; ++i)
        inside[i] = locate_slot_cell(g, &s.positions[size_t(i) * d],
                                     has_vel ? &s.velocities[size_t(i) * d] : nullptr, cell_of[i]);
      if (k == 1) {
        for (int i = 0; i < n; ++i)
          if (inside[i]) ++local[cell_of[i]];
      } else {
        for (const auto& [i, j] : pairs)
          if (inside[i] && inside[j]) ++local[cell_of[i] * slot + cell_of[j]];
      }
    }
#pragma omp critical
    for (size_t c = 0; c < counts.size(); ++c) counts[c] += local[c];
  }

  GridDensity f;
  f.spec = g;
  f.time = ds.snapshot_times[snap];
  const double samples = double(per_replica) * ds.replica_count;
  const double scale = 1.0 / (samples * g.cell_volume());
  f.values.resize(counts.size());
  uint64_t total = 0;
  for (size_t c = 0; c < counts.size(); ++c) {
    f.values[c] = double(counts[c]) * scale;
    total += counts[c];
  }
  f.truncation_mass = (samples - double(total)) / samples;
  f.provenance = {{"config_hash", ds.config_hash}, {"replicas", ds.replica_count}, {"tuples_per_replica", per_replica}};
  return f;
}

GridDensity first_slot_marginal(const GridDensity& f) {
  if (f.spec.k != 2) throw ConfigError("first_slot_marginal needs a k = 2 density");
  GridDensity out;
  out.spec = f.spec;
  out.spec.k = 1;
  out.time = f.time;
  out.truncation_mass = f.truncation_mass;
  out.provenance = f.provenance;
  const size_t slot = f.spec.slot_cells();
  const double vol = f.spec.slot_cell_volume();
  out.values.assign(slot, 0.0);
  for (size_t a = 0; a < slot; ++a) {
    double s = 0.0;
    for (size_t b = 0; b < slot; ++b) s += f.values[a * slot + b];
    out.values[a] = s * vol;
  }
  return out;
}

GridDensity tensor_square(const GridDensity& f) {
  if (f.spec.k != 1) throw ConfigError("tensor_square needs a k = 1 density");
  GridDensity out;
  out.spec = f.spec;
  out.spec.k = 2;
  out.time = f.time;
  out.provenance = f.provenance;
  const double m = f.mass();
  out.truncation_mass = 1.0 - m * m;
  const size_t slot = f.spec.slot_cells();
  out.values.resize(slot * slot);
  for (size_t a = 0; a < slot; ++a)
    for (size_t b = 0; b < slot; ++b) out.values[a * slot + b] = f.values[a] * f.values[b];
  return out;
}

void to_json(Json& j, const WeightedNormReport& r) {
  j = Json{{"q", r.q},
           {"lambda", r.lambda},
           {"value", r.value},
           {"gaussian_moment", r.gaussian_moment},
           {"beta", r.beta},
           {"truncation_mass", r.truncation_mass}};
}

double cell_energy(const GridSpec& g, size_t cell, const Kernel* kernel, int N) {
  const size_t slot = g.slot_cells();
  if (g.k == 1) return 1.0 + slot_center(g, cell).v2;
  const SlotCenter a = slot_center(g, cell / slot), b = slot_center(g, cell % slot);
  double e = 2.0 + a.v2 + b.v2;
  if (kernel && N > 0) {
    double r[kMaxDim] = {0.0, 0.0, 0.0};
    for (int c = 0; c < g.d; ++c) r[c] = minimum_image_1d(a.x[c] - b.x[c]);
    e += 2.0 / N * kernel->potential_unchecked(r);
  }
  return e;
}

WeightedNormReport weighted_lq_norm(const GridDensity& f, double q, double lambda, const Kernel* kernel, int N,
                                    double beta) {
  if (!(q >= 1.0)) throw ConfigError("q must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (beta < 0.0) beta = lambda;
  if (kernel && kernel->dim() != f.spec.d) throw GridMismatch("kernel dimension does not match the grid");
  WeightedNormReport rep;
  rep.q = q;
  rep.lambda = lambda;
  rep.beta = beta;
  rep.truncation_mass = f.truncation_mass;
  const double vol = f.spec.cell_volume();
  for (size_t c = 0; c < f.values.size(); ++c) {
    const double v = f.values[c];
    if (v == 0.0) continue;
    const double expo = lambda * cell_energy(f.spec, c, kernel, N);
    if (expo > kMaxExponent)
      throw WeightOverflow("exp(lambda e_k) overflows at cell " + std::to_string(c) + " (exponent " +
                           format_double(expo) + ")");
    rep.value += std::pow(std::abs(v), q) * std::exp(expo) * vol;
  }
  rep.gaussian_moment = gaussian_moment(f, beta);
  return rep;
}

double gaussian_moment(const GridDensity& f, double beta) {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  const size_t slot = f.spec.slot_cells();
  const double vol = f.spec.cell_volume();
  double sum = 0.0;
  for (size_t c = 0; c < f.values.size(); ++c) {
    if (f.values[c] == 0.0) continue;
    double v2 = 0.0;
    if (f.spec.k == 1) {
      v2 = slot_center(f.spec, c).v2;
    } else {
      v2 = slot_center(f.spec, c / slot).v2 + slot_center(f.spec, c % slot).v2;
    }
    const double expo = beta * v2;
    if (expo > kMaxExponent) throw WeightOverflow("exp(beta |v|^2) overflows at cell " + std::to_string(c));
    sum += std::exp(expo) * f.values[c] * vol;
  }
  return sum;
}

std::vector<double> kernel_magnitude_grid(const Kernel& kernel, int x_bins) {
  const int d = kernel.dim();
  size_t total = 1;
  for (int c = 0; c < d; ++c) total *= size_t(x_bins);
  std::vector<double> out(total);
  for (size_t idx = 0; idx < total; ++idx) {
    size_t rem = idx;
    double r[kMaxDim] = {0.0, 0.0, 0.0};
    for (int c = d - 1; c >= 0; --c) {
      r[c] = minimum_image_1d(double(rem % x_bins) / x_bins);
      rem /= x_bins;
    }
    double k[kMaxDim];
    kernel.force_unchecked(r, k);
    double k2 = 0.0;
    for (int c = 0; c < d; ++c) k2 += k[c] * k[c];
    out[idx] = std::sqrt(k2);
  }
  return out;
}

void to_json(Json& j, const HolderReport& r) {
  j = Json{{"lhs", r.lhs},
           {"rhs", r.rhs},
           {"kernel_norm", r.kernel_norm},
           {"density_norm", r.density_norm},
           {"satisfied", r.satisfied}};
}

HolderReport holder_check(const std::vector<double>& kernel_grid, const GridDensity& f, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw ConfigError("Hoelder exponents must be >= 1");
  const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
  if (inv_p + 1.0 / q > 1.0 + 1e-15)
    throw ExponentViolation("1/p + 1/q = " + format_double(inv_p + 1.0 / q) + " exceeds 1");
  const GridSpec& g = f.spec;
  if (g.k != 2) throw ConfigError("holder_check needs a density of order k + 1 = 2");
  const int d = g.d;
  size_t xcells = 1;
  for (int c = 0; c < d; ++c) xcells *= size_t(g.x_bins);
  if (kernel_grid.size() != xcells) throw GridMismatch("kernel grid does not match the density's x grid");

  const size_t slot = g.slot_cells();
  const double slot_vol = g.slot_cell_volume();
  const double hd = 1.0 / double(xcells);

  // Spatial indices of every slot cell.
  std::vector<std::array<int, kMaxDim>> xidx(slot);
  for (size_t c = 0; c < slot; ++c) {
    int xi[kMaxDim] = {0, 0, 0}, vi[kMaxDim] = {0, 0, 0};
    unpack_slot_cell(g, c, xi, vi);
    xidx[c] = {xi[0], xi[1], xi[2]};
  }

  double lhs_q = 0.0;
  for (size_t a = 0; a < slot; ++a) {
    double gsum = 0.0;
    for (size_t b = 0; b < slot; ++b) {
      const double fv = f.values[a * slot + b];
      if (fv == 0.0) continue;
      size_t kidx = 0;
      for (int c = 0; c < d; ++c) {
        const int diff = ((xidx[a][c] - xidx[b][c]) % g.x_bins + g.x_bins) % g.x_bins;
        kidx = kidx * g.x_bins + size_t(diff);
      }
      gsum += kernel_grid[kidx] * fv;
    }
    gsum *= slot_vol;
    lhs_q += std::pow(std::abs(gsum), q) * slot_vol;
  }

  HolderReport rep;
  rep.lhs = std::pow(lhs_q, 1.0 / q);
  if (std::isinf(p)) {
    for (double kv : kernel_grid) rep.kernel_norm = std::max(rep.kernel_norm, std::abs(kv));
  } else {
    double s = 0.0;
    for (double kv : kernel_grid) s += std::pow(std::abs(kv), p) * hd;
    rep.kernel_norm = std::pow(s, 1.0 / p);
  }
  double fq = 0.0;
  for (double v : f.values) fq += std::pow(std::abs(v), q);
  rep.density_norm = std::pow(fq * g.cell_volume(), 1.0 / q);
  const double box = g.has_velocity() ? std::pow(2.0 * g.v_max, d) : 1.0;
  rep.rhs = rep.kernel_norm * rep.density_norm * std::pow(box, 1.0 - 1.0 / q);
  rep.satisfied = rep.lhs <= rep.rhs * (1.0 + 1e-9);
  return rep;
}

void to_json(Json& j, const ChaosDistance& c) {
  j = Json{{"l1", c.l1}, {"lq", c.lq}, {"weighted_lq", c.weighted_lq}};
}

ChaosDistance chaos_distance(const GridDensity& empirical, const GridDensity& reference, double q, double lambda,
                             const Kernel* kernel, int N) {
  if (!(empirical.spec == reference.spec) || empirical.values.size() != reference.values.size())
    throw GridMismatch("chaos_distance needs identical grids");
  if (!(q >= 1.0)) throw ConfigError("q must be >= 1");
  const double vol = empirical.spec.cell_volume();
  ChaosDistance out;
  double lq = 0.0, wq = 0.0;
  for (size_t c = 0; c < empirical.values.size(); ++c) {
    const double diff = std::abs(empirical.values[c] - reference.values[c]);
    if (diff == 0.0) continue;
    out.l1 += diff * vol;
    const double dq = std::pow(diff, q) * vol;
    lq += dq;
    const double expo = lambda == 0.0 ? 0.0 : lambda * cell_energy(empirical.spec, c, kernel, N);
    if (expo > kMaxExponent) throw WeightOverflow("weighted chaos distance overflows");
    wq += dq * std::exp(expo);
  }
  out.lq = std::pow(lq, 1.0 / q);
  out.weighted_lq = std::pow(wq, 1.0 / q);
  return out;
}

}  // namespace meanfield
