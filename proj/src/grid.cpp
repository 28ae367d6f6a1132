#include "meanfield/grid.hpp"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/torus.hpp"

namespace meanfield {

namespace {
size_t ipow(size_t b, int e) {
  size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}
}  // namespace

size_t GridSpec::slot_cells() const {
  return ipow(size_t(x_bins), d) * (has_velocity() ? ipow(size_t(v_bins), d) : 1);
}

size_t GridSpec::total_cells() const { return ipow(slot_cells(), k); }

double GridSpec::slot_cell_volume() const {
  double vol = std::pow(1.0 / x_bins, d);
  if (has_velocity()) vol *= std::pow(2.0 * v_max / v_bins, d);
  return vol;
}

double GridSpec::cell_volume() const { return std::pow(slot_cell_volume(), k); }

void to_json(Json& j, const GridSpec& g) {
  j = Json{{"k", g.k}, {"d", g.d}, {"x_bins", g.x_bins}, {"v_bins", g.v_bins}, {"v_max", g.v_max}};
}

void from_json(const Json& j, GridSpec& g) {
  g = GridSpec{};
  g.k = j.value("k", 1);
  g.d = j.value("d", 1);
  g.x_bins = j.value("x_bins", 64);
  g.v_bins = j.value("v_bins", 64);
  g.v_max = j.value("v_max", 6.0);
}

void validate(const GridSpec& g) {
  if (g.k < 1 || g.k > 2) throw ConfigError("marginal order k must be 1 or 2");
  if (g.d < 1 || g.d > kMaxDim) throw ConfigError("grid dimension must be 1, 2 or 3");
  if (g.x_bins < 4) throw GridTooCoarse("x_bins must be at least 4");
  if (g.v_bins != 0 && g.v_bins < 4) throw GridTooCoarse("v_bins must be 0 (spatial only) or at least 4");
  if (g.has_velocity() && !(g.v_max > 0.0)) throw ConfigError("v_max must be positive");
  if (double(g.slot_cells()) * (g.k == 2 ? double(g.slot_cells()) : 1.0) > 2e8)
    throw ConfigError("grid has too many cells");
}

double GridDensity::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * spec.cell_volume();
}

void unpack_slot_cell(const GridSpec& g, size_t cell, int* x_idx, int* v_idx) {
  if (g.has_velocity())
    for (int c = g.d - 1; c >= 0; --c) {
      v_idx[c] = static_cast<int>(cell % g.v_bins);
      cell /= g.v_bins;
    }
  for (int c = g.d - 1; c >= 0; --c) {
    x_idx[c] = static_cast<int>(cell % g.x_bins);
    cell /= g.x_bins;
  }
}

size_t pack_slot_cell(const GridSpec& g, const int* x_idx, const int* v_idx) {
  size_t cell = 0;
  for (int c = 0; c < g.d; ++c) cell = cell * g.x_bins + x_idx[c];
  if (g.has_velocity())
    for (int c = 0; c < g.d; ++c) cell = cell * g.v_bins + v_idx[c];
  return cell;
}

bool locate_slot_cell(const GridSpec& g, const double* x, const double* v, size_t& cell) {
  int xi[kMaxDim] = {0, 0, 0}, vi[kMaxDim] = {0, 0, 0};
  for (int c = 0; c < g.d; ++c) {
    int i = static_cast<int>(std::floor(wrap_unit(x[c]) * g.x_bins));
    xi[c] = std::min(i, g.x_bins - 1);
  }
  if (g.has_velocity())
    for (int c = 0; c < g.d; ++c) {
      const double s = (v[c] + g.v_max) / (2.0 * g.v_max);
      if (!(s >= 0.0 && s < 1.0)) return false;
      vi[c] = std::min(static_cast<int>(std::floor(s * g.v_bins)), g.v_bins - 1);
    }
  cell = pack_slot_cell(g, xi, vi);
  return true;
}

Tensor to_tensor(const GridDensity& f) {
  Tensor t;
  t.header = {{"grid", f.spec},
              {"time", f.time},
              {"truncation_mass", f.truncation_mass},
              {"provenance", f.provenance},
              {"layout", "slot-major; per slot x axes then v axes, row-major"}};
  const int axes_per_slot = f.spec.d * (f.spec.has_velocity() ? 2 : 1);
  for (int s = 0; s < f.spec.k; ++s)
    for (int a = 0; a < axes_per_slot; ++a)
      t.shape.push_back(size_t(a < f.spec.d ? f.spec.x_bins : f.spec.v_bins));
  t.values = f.values;
  return t;
}

GridDensity from_tensor(const Tensor& t) {
  if (!t.header.contains("grid")) throw MissingData("tensor has no grid description");
  GridDensity f;
  f.spec = t.header.at("grid").get<GridSpec>();
  validate(f.spec);
  if (t.values.size() != f.spec.total_cells()) throw GridMismatch("tensor payload does not match its grid");
  f.values = t.values;
  f.time = t.header.value("time", 0.0);
  f.truncation_mass = t.header.value("truncation_mass", 0.0);
  f.provenance = t.header.value("provenance", Json::object());
  return f;
}

void write_density(const std::filesystem::path& path, const GridDensity& f) { write_tensor(path, to_tensor(f)); }
GridDensity read_density(const std::filesystem::path& path) { return from_tensor(read_tensor(path)); }

std::string density_csv(const GridDensity& f) {
  if (f.spec.k != 1) throw ConfigError("CSV export is only available for k = 1 densities");
  std::vector<std::string> header;
  for (int c = 0; c < f.spec.d; ++c) header.push_back("x" + std::to_string(c + 1));
  if (f.spec.has_velocity())
    for (int c = 0; c < f.spec.d; ++c) header.push_back("v" + std::to_string(c + 1));
  header.push_back("density");
  CsvWriter csv(header);
  std::vector<double> row(header.size());
  int xi[kMaxDim], vi[kMaxDim];
  for (size_t cell = 0; cell < f.values.size(); ++cell) {
    unpack_slot_cell(f.spec, cell, xi, vi);
    size_t a = 0;
    for (int c = 0; c < f.spec.d; ++c) row[a++] = f.spec.x_center(xi[c]);
    if (f.spec.has_velocity())
      for (int c = 0; c < f.spec.d; ++c) row[a++] = f.spec.v_center(vi[c]);
    row[a] = f.values[cell];
    csv.row(row);
  }
  return csv.str();
}

}  // namespace meanfield
