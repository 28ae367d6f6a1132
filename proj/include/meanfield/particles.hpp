#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "meanfield/io.hpp"
#include "meanfield/kernel.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

enum class Order { kSecond, kFirst };

std::string to_string(Order o);
Order order_from_string(const std::string& s);

struct SimConfig {
  int N = 1;
  int d = 1;
  double sigma = 0.0;
  double dt = 1e-3;
  double t_end = 1.0;
  Order order = Order::kSecond;
  KernelSpec kernel;
  uint64_t seed = 0;
  int snapshot_stride = 1;

  bool operator==(const SimConfig&) const = default;
};

void to_json(Json& j, const SimConfig& c);
void from_json(const Json& j, SimConfig& c);

/// Throws ConfigError when fields are out of range or inconsistent.
void validate(const SimConfig& c);
/// Number of steps: round(t_end / dt), so |steps * dt - t_end| <= dt / 2.
uint64_t step_count(const SimConfig& c);

/// Positions are stored flat (particle-major, N * d) and kept in [0,1)^d.
/// Velocities are empty in first-order mode.
struct ParticleState {
  int d = 1;
  std::vector<double> positions;
  std::vector<double> velocities;
  double time = 0.0;
  RngState rng;

  int N() const noexcept { return d > 0 ? static_cast<int>(positions.size() / d) : 0; }
  bool has_velocities() const noexcept { return !velocities.empty(); }
  bool operator==(const ParticleState&) const = default;
};

/// F_i = (1/N) sum_{j != i} K(x_i - x_j), flat N * d. Each F_i is summed
/// sequentially over j, so the result does not depend on the thread count.
std::vector<double> compute_forces(const ParticleState& state, const Kernel& kernel);
std::vector<double> compute_forces(const ParticleState& state, const KernelSpec& kernel);

/// One semi-implicit Euler-Maruyama step (velocity first, then position);
/// first order: X <- X + F dt + sigma sqrt(dt) xi. Throws NonFiniteState.
void step(ParticleState& state, const SimConfig& config, const Kernel& kernel);

struct EnergyReport {
  double kinetic = 0.0;    // sum_i (1 + |v_i|^2)
  double potential = 0.0;  // (1/N) sum_{i != j} phi(x_i - x_j)
  double total = 0.0;
  double min_pair_dist = 0.0;
  double collision_floor = 0.0;      // exp(-N * total), may underflow
  double log_collision_floor = 0.0;  // -N * total
};

void to_json(Json& j, const EnergyReport& r);

EnergyReport energy_report(const ParticleState& state, const Kernel& kernel);
std::array<double, kMaxDim> total_momentum(const ParticleState& state);

/// Drift of E[e_N] per unit time for the second-order system: N * d * sigma^2
/// from the Ito correction of every noise coordinate.
double expected_energy_slope(const SimConfig& config);
/// The same drift normalized as sigma^2, i.e. per noise coordinate.
double energy_slope_per_coordinate(const SimConfig& config);

struct Snapshot {
  double time = 0.0;
  uint64_t step = 0;
  std::vector<double> positions;
  std::vector<double> velocities;
  bool operator==(const Snapshot&) const = default;
};

Snapshot take_snapshot(const ParticleState& state);

using SnapshotSink = std::function<void(const Snapshot&, const ParticleState&)>;

/// Advances `state` to the config's final step, calling `sink` at every
/// step divisible by snapshot_stride. The starting state is reported only
/// when `emit_start` is set (a resumed run has already recorded it).
void simulate(ParticleState& state, const SimConfig& config, const Kernel& kernel, const SnapshotSink& sink,
              bool emit_start = true);

}  // namespace meanfield
