#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "meanfield/grid.hpp"
#include "meanfield/particles.hpp"

namespace meanfield {

/// Law of the initial particle configuration (i.i.d. over particles).
///  - product_gaussian: x_1 has density 1 + perturbation * cos(2 pi mode x_1),
///    the other spatial axes are uniform, velocities are N(0, velocity_std^2)
///    per coordinate;
///  - grid: inverse-CDF sampling of a tabulated k=1 GridDensity, uniform
///    within the chosen cell.
struct InitialLaw {
  enum class Kind { kProductGaussian, kGrid };
  Kind kind = Kind::kProductGaussian;
  double velocity_std = 1.0;
  double perturbation = 0.0;
  int mode = 1;
  std::shared_ptr<const GridDensity> density;
};

void to_json(Json& j, const InitialLaw& law);
/// Grid laws are written with the density's content hash only; reading one
/// back requires the density to be attached separately.
void from_json(const Json& j, InitialLaw& law);

/// Draws the initial state of one replica with the given seed.
ParticleState sample_initial_state(const SimConfig& config, const InitialLaw& law, uint64_t seed);

struct EnsembleDataset {
  SimConfig config;
  Json initial_law = Json::object();
  int replica_count = 0;
  std::vector<double> snapshot_times;
  std::vector<uint64_t> snapshot_steps;
  /// snapshots[r][s]: replica r at snapshot_times[s].
  std::vector<std::vector<Snapshot>> snapshots;
  /// Current state of every replica (for resuming).
  std::vector<ParticleState> states;
  std::string config_hash;

  uint64_t seed_of(int replica) const noexcept { return config.seed + static_cast<uint64_t>(replica); }
  size_t snapshot_index(double time) const;
  bool operator==(const EnsembleDataset&) const = default;
};

/// Replicas at step 0 with their initial snapshot recorded. Replica r uses
/// seed config.seed + r.
EnsembleDataset init_ensemble(const SimConfig& config, int replicas, const InitialLaw& law);

/// Runs every replica up to `target_step` (capped at the final step).
/// Replicas run concurrently; a NonFiniteState is rethrown with the lowest
/// failing replica index.
void advance_ensemble(EnsembleDataset& ds, const Kernel& kernel, uint64_t target_step);

EnsembleDataset run_ensemble(const SimConfig& config, int replicas, const InitialLaw& law);

/// Binary checkpoint: magic "MFCK", u64 header length, JSON header, replica
/// payload, then the hex SHA-256 of everything before it.
void checkpoint(const EnsembleDataset& ds, const std::filesystem::path& path);
EnsembleDataset restore(const std::filesystem::path& path);

/// Dataset directory: config.json, snapshots/replica_{r}.bin, manifest.json.
/// Snapshot files: magic "MFS1", u32 version, u64 N, u32 d, u32 has_vel,
/// u64 count, then per record f64 time, u64 step, positions, velocities.
void write_dataset_dir(const EnsembleDataset& ds, const std::filesystem::path& dir);
EnsembleDataset read_dataset_dir(const std::filesystem::path& dir);

std::string encode_snapshots(const std::vector<Snapshot>& records, int N, int d, bool has_vel);
std::vector<Snapshot> decode_snapshots(std::string_view bytes, int& N, int& d, bool& has_vel);

}  // namespace meanfield
