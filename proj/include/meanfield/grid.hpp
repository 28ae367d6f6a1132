#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "meanfield/io.hpp"

namespace meanfield {

/// Histogram grid for a k-particle marginal. Each of the k slots carries d
/// spatial axes on [0,1) with x_bins cells and, when v_bins > 0, d velocity
/// axes on [-v_max, v_max) with v_bins cells.
struct GridSpec {
  int k = 1;
  int d = 1;
  int x_bins = 64;
  int v_bins = 64;
  double v_max = 6.0;

  bool has_velocity() const noexcept { return v_bins > 0; }
  /// Cells per particle slot: x_bins^d * v_bins^d.
  size_t slot_cells() const;
  size_t total_cells() const;
  /// Phase-space volume of one slot cell.
  double slot_cell_volume() const;
  double cell_volume() const;
  double x_center(int i) const noexcept { return (i + 0.5) / x_bins; }
  double v_center(int j) const noexcept { return -v_max + (j + 0.5) * 2.0 * v_max / v_bins; }

  bool operator==(const GridSpec&) const = default;
};

void to_json(Json& j, const GridSpec& g);
void from_json(const Json& j, GridSpec& g);

/// Throws GridTooCoarse if an axis has fewer than 4 bins, ConfigError on
/// other invalid fields.
void validate(const GridSpec& g);

/// Slot-major, row-major density values: the flat index of a k-tuple of slot
/// cells (c_1, ..., c_k) is ((c_1 * S) + c_2) * S + ..., and within a slot the
/// cell index is (x_1, ..., x_d, v_1, ..., v_d) in row-major order.
struct GridDensity {
  GridSpec spec;
  std::vector<double> values;
  double time = 0.0;
  /// Probability mass that fell outside the velocity box.
  double truncation_mass = 0.0;
  Json provenance = Json::object();

  double mass() const;
};

/// Unpacks a slot cell index into per-axis indices (x axes first).
void unpack_slot_cell(const GridSpec& g, size_t cell, int* x_idx, int* v_idx);
size_t pack_slot_cell(const GridSpec& g, const int* x_idx, const int* v_idx);

/// Slot cell containing a phase-space point; returns false when a velocity
/// lies outside [-v_max, v_max).
bool locate_slot_cell(const GridSpec& g, const double* x, const double* v, size_t& cell);

Tensor to_tensor(const GridDensity& f);
GridDensity from_tensor(const Tensor& t);
void write_density(const std::filesystem::path& path, const GridDensity& f);
GridDensity read_density(const std::filesystem::path& path);

/// CSV of a k=1 density: columns x_1..x_d[, v_1..v_d], density.
std::string density_csv(const GridDensity& f);

}  // namespace meanfield
