#include "meanfield/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>

#include "meanfield/errors.hpp"

namespace meanfield {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::string_view kCheckpointMagic = "MFCK";
constexpr std::string_view kSnapshotMagic = "MFS1";
constexpr uint32_t kSnapshotVersion = 1;

// Inverse CDF of 1 + eps cos(2 pi m x) on [0, 1).
double sample_cosine(double u, double eps, int m) {
  if (eps == 0.0) return u;
  const double w = 2.0 * kPi * m;
  double lo = 0.0, hi = 1.0, x = u;
  for (int it = 0; it < 100; ++it) {
    const double f = x + eps * std::sin(w * x) / w - u;
    if (std::abs(f) < 1e-15) break;
    if (f > 0.0) hi = x; else lo = x;
    const double step = f / (1.0 + eps * std::cos(w * x));
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return wrap_unit(x);
}

std::array<double, 8> uniforms(uint64_t seed, RngStream stream, uint32_t particle) {
  std::array<double, 8> u{};
  for (uint32_t b = 0; b < 4; ++b) {
    const auto p = uniform_pair(seed, stream, 0, particle, b);
    u[2 * b] = p[0];
    u[2 * b + 1] = p[1];
  }
  return u;
}

void write_state(ByteWriter& w, const ParticleState& s) {
  w.f64(s.time);
  w.u64(s.rng.seed);
  w.u64(s.rng.step);
  w.f64s(s.positions);
  w.f64s(s.velocities);
}

ParticleState read_state(ByteReader& r, int n, int d, bool has_vel) {
  ParticleState s;
  s.d = d;
  s.time = r.f64();
  s.rng.seed = r.u64();
  s.rng.step = r.u64();
  s.positions.resize(size_t(n) * d);
  r.f64s(s.positions);
  if (has_vel) {
    s.velocities.resize(size_t(n) * d);
    r.f64s(s.velocities);
  }
  return s;
}

void write_record(ByteWriter& w, const Snapshot& s) {
  w.f64(s.time);
  w.u64(s.step);
  w.f64s(s.positions);
  w.f64s(s.velocities);
}

Snapshot read_record(ByteReader& r, int n, int d, bool has_vel) {
  Snapshot s;
  s.time = r.f64();
  s.step = r.u64();
  s.positions.resize(size_t(n) * d);
  r.f64s(s.positions);
  if (has_vel) {
    s.velocities.resize(size_t(n) * d);
    r.f64s(s.velocities);
  }
  return s;
}

Json dataset_header(const EnsembleDataset& ds) {
  return Json{{"config", ds.config},
              {"initial_law", ds.initial_law},
              {"replica_count", ds.replica_count},
              {"snapshot_times", ds.snapshot_times},
              {"snapshot_steps", ds.snapshot_steps},
              {"config_hash", ds.config_hash}};
}

void apply_header(EnsembleDataset& ds, const Json& h) {
  ds.config = h.at("config").get<SimConfig>();
  ds.initial_law = h.at("initial_law");
  ds.replica_count = h.at("replica_count").get<int>();
  ds.snapshot_times = h.at("snapshot_times").get<std::vector<double>>();
  ds.snapshot_steps = h.at("snapshot_steps").get<std::vector<uint64_t>>();
  ds.config_hash = h.at("config_hash").get<std::string>();
  validate(ds.config);
  if (ds.replica_count < 1) throw CorruptCheckpoint("replica count must be positive");
}

}  // namespace

void to_json(Json& j, const InitialLaw& law) {
  if (law.kind == InitialLaw::Kind::kProductGaussian) {
    j = Json{{"kind", "product_gaussian"},
             {"velocity_std", law.velocity_std},
             {"perturbation", law.perturbation},
             {"mode", law.mode}};
  } else {
    j = Json{{"kind", "grid"}, {"velocity_std", law.velocity_std}};
    j["density_hash"] = law.density ? sha256_hex(encode_tensor(to_tensor(*law.density))) : "";
  }
}

void from_json(const Json& j, InitialLaw& law) {
  law = InitialLaw{};
  const auto kind = j.value("kind", std::string("product_gaussian"));
  if (kind == "product_gaussian") {
    law.kind = InitialLaw::Kind::kProductGaussian;
    law.perturbation = j.value("perturbation", 0.0);
    law.mode = j.value("mode", 1);
  } else if (kind == "grid") {
    law.kind = InitialLaw::Kind::kGrid;
  } else {
    throw ConfigError("unknown initial law '" + kind + "'");
  }
  law.velocity_std = j.value("velocity_std", 1.0);
}

ParticleState sample_initial_state(const SimConfig& config, const InitialLaw& law, uint64_t seed) {
  validate(config);
  const int n = config.N, d = config.d;
  const bool second = config.order == Order::kSecond;
  if (!(law.velocity_std >= 0.0)) throw ConfigError("velocity_std must be nonnegative");
  ParticleState s;
  s.d = d;
  s.positions.resize(size_t(n) * d);
  if (second) s.velocities.assign(size_t(n) * d, 0.0);
  s.rng = RngState{seed, 0};

  std::vector<double> cdf;
  const GridDensity* g = nullptr;
  if (law.kind == InitialLaw::Kind::kGrid) {
    if (!law.density) throw MissingData("grid initial law has no density attached");
    g = law.density.get();
    if (g->spec.k != 1 || g->spec.d != d) throw GridMismatch("initial density must be a k=1 grid of dimension d");
    cdf.resize(g->values.size());
    double acc = 0.0;
    for (size_t c = 0; c < g->values.size(); ++c) {
      if (g->values[c] < 0.0) throw ConfigError("initial density has negative values");
      acc += g->values[c];
      cdf[c] = acc;
    }
    if (!(acc > 0.0)) throw ConfigError("initial density has zero mass");
  } else {
    if (std::abs(law.perturbation) > 1.0) throw ConfigError("perturbation amplitude must be at most 1");
    if (law.mode < 1) throw ConfigError("perturbation mode must be >= 1");
  }

  for (int i = 0; i < n; ++i) {
    const auto u = uniforms(seed, RngStream::kInitialPositions, static_cast<uint32_t>(i));
    double* x = &s.positions[size_t(i) * d];
    bool have_v = false;
    if (g) {
      const double target = u[0] * cdf.back();
      size_t cell = static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
      cell = std::min(cell, cdf.size() - 1);
      int xi[kMaxDim], vi[kMaxDim];
      unpack_slot_cell(g->spec, cell, xi, vi);
      for (int c = 0; c < d; ++c) x[c] = wrap_unit((xi[c] + u[1 + c]) / g->spec.x_bins);
      if (second && g->spec.has_velocity()) {
        const double dv = 2.0 * g->spec.v_max / g->spec.v_bins;
        for (int c = 0; c < d; ++c) s.velocities[size_t(i) * d + c] = -g->spec.v_max + (vi[c] + u[1 + d + c]) * dv;
        have_v = true;
      }
    } else {
      x[0] = sample_cosine(u[0], law.perturbation, law.mode);
      for (int c = 1; c < d; ++c) x[c] = u[c];
    }
    if (second && !have_v)
      for (int b = 0; 2 * b < d; ++b) {
        const auto z = normal_pair(seed, RngStream::kInitialVelocities, 0, static_cast<uint32_t>(i),
                                   static_cast<uint32_t>(b));
        for (int e = 0; e < 2 && 2 * b + e < d; ++e)
          s.velocities[size_t(i) * d + 2 * b + e] = law.velocity_std * z[e];
      }
  }
  return s;
}

size_t EnsembleDataset::snapshot_index(double time) const {
  for (size_t s = 0; s < snapshot_times.size(); ++s)
    if (std::abs(snapshot_times[s] - time) <= 1e-9 * std::max(1.0, std::abs(time))) return s;
  throw MissingData("no snapshot at time " + format_double(time));
}

EnsembleDataset init_ensemble(const SimConfig& config, int replicas, const InitialLaw& law) {
  validate(config);
  if (replicas < 1) throw ConfigError("replicas must be >= 1");
  EnsembleDataset ds;
  ds.config = config;
  ds.initial_law = law;
  ds.replica_count = replicas;
  ds.config_hash = content_hash(Json{{"config", config}, {"initial_law", ds.initial_law}, {"replicas", replicas}});
  ds.states.resize(replicas);
  ds.snapshots.resize(replicas);
  for (int r = 0; r < replicas; ++r) {
    ds.states[r] = sample_initial_state(config, law, ds.seed_of(r));
    ds.snapshots[r].push_back(take_snapshot(ds.states[r]));
  }
  ds.snapshot_times = {0.0};
  ds.snapshot_steps = {0};
  return ds;
}

void advance_ensemble(EnsembleDataset& ds, const Kernel& kernel, uint64_t target_step) {
  const SimConfig& cfg = ds.config;
  target_step = std::min(target_step, step_count(cfg));
  const auto stride = static_cast<uint64_t>(cfg.snapshot_stride);
  const int replicas = ds.replica_count;
  std::vector<std::exception_ptr> failures(replicas);

#pragma omp parallel for schedule(dynamic, 1) if (replicas > 1)
  for (int r = 0; r < replicas; ++r) {
    try {
      ParticleState& st = ds.states[r];
      while (st.rng.step < target_step) {
        step(st, cfg, kernel);
        if (st.rng.step % stride == 0) ds.snapshots[r].push_back(take_snapshot(st));
      }
    } catch (const NonFiniteState& e) {
      failures[r] = std::make_exception_ptr(
          NonFiniteState("replica " + std::to_string(r) + ": " + e.what(), r, e.step(), e.particle()));
    } catch (...) {
      failures[r] = std::current_exception();
    }
  }
  for (int r = 0; r < replicas; ++r)
    if (failures[r]) std::rethrow_exception(failures[r]);

  ds.snapshot_times.clear();
  ds.snapshot_steps.clear();
  for (const auto& snap : ds.snapshots.front()) {
    ds.snapshot_times.push_back(snap.time);
    ds.snapshot_steps.push_back(snap.step);
  }
}

EnsembleDataset run_ensemble(const SimConfig& config, int replicas, const InitialLaw& law) {
  EnsembleDataset ds = init_ensemble(config, replicas, law);
  const Kernel kernel(config.kernel);
  advance_ensemble(ds, kernel, step_count(config));
  return ds;
}

// ---------------------------------------------------------------------------
// Checkpoints

void checkpoint(const EnsembleDataset& ds, const std::filesystem::path& path) {
  const int n = ds.config.N, d = ds.config.d;
  const bool has_vel = ds.config.order == Order::kSecond;
  Json header = dataset_header(ds);
  header["format"] = "MFCK";
  header["version"] = 1;
  const std::string h = canonical_dump(header);
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u64(h.size());
  w.bytes(h);
  for (int r = 0; r < ds.replica_count; ++r) {
    write_state(w, ds.states[r]);
    w.u64(ds.snapshots[r].size());
    for (const auto& s : ds.snapshots[r]) {
      if (s.positions.size() != size_t(n) * d || s.velocities.size() != (has_vel ? size_t(n) * d : 0))
        throw ConfigError("snapshot size does not match the configuration");
      write_record(w, s);
    }
  }
  std::string bytes = w.take();
  bytes += sha256_hex(bytes);
  write_file(path, bytes);
}

EnsembleDataset restore(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4 + 8 + 64) throw CorruptCheckpoint("checkpoint is truncated");
  const std::string_view body(bytes.data(), bytes.size() - 64);
  if (sha256_hex(body) != std::string_view(bytes).substr(bytes.size() - 64))
    throw CorruptCheckpoint("checkpoint hash mismatch");
  ByteReader r(body);
  if (r.bytes(4) != kCheckpointMagic) throw CorruptCheckpoint("not a checkpoint file");
  const uint64_t hlen = r.u64();
  EnsembleDataset ds;
  try {
    apply_header(ds, Json::parse(r.bytes(hlen)));
  } catch (const Json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint header: ") + e.what());
  }
  const int n = ds.config.N, d = ds.config.d;
  const bool has_vel = ds.config.order == Order::kSecond;
  ds.states.resize(ds.replica_count);
  ds.snapshots.resize(ds.replica_count);
  for (int rep = 0; rep < ds.replica_count; ++rep) {
    ds.states[rep] = read_state(r, n, d, has_vel);
    const uint64_t count = r.u64();
    if (count > r.remaining()) throw CorruptCheckpoint("snapshot count exceeds payload");
    for (uint64_t s = 0; s < count; ++s) ds.snapshots[rep].push_back(read_record(r, n, d, has_vel));
  }
  if (r.remaining() != 0) throw CorruptCheckpoint("trailing bytes in checkpoint");
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset directories

std::string encode_snapshots(const std::vector<Snapshot>& records, int N, int d, bool has_vel) {
  ByteWriter w;
  w.bytes(kSnapshotMagic);
  w.u32(kSnapshotVersion);
  w.u64(static_cast<uint64_t>(N));
  w.u32(static_cast<uint32_t>(d));
  w.u32(has_vel ? 1u : 0u);
  w.u64(records.size());
  for (const auto& s : records) write_record(w, s);
  return w.take();
}

std::vector<Snapshot> decode_snapshots(std::string_view bytes, int& N, int& d, bool& has_vel) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kSnapshotMagic) throw CorruptCheckpoint("not an MFS1 snapshot file");
  if (r.u32() != kSnapshotVersion) throw CorruptCheckpoint("unsupported snapshot version");
  N = static_cast<int>(r.u64());
  d = static_cast<int>(r.u32());
  has_vel = r.u32() != 0;
  if (N < 1 || d < 1 || d > kMaxDim) throw CorruptCheckpoint("invalid snapshot header");
  const uint64_t count = r.u64();
  std::vector<Snapshot> out;
  for (uint64_t s = 0; s < count; ++s) out.push_back(read_record(r, N, d, has_vel));
  if (r.remaining() != 0) throw CorruptCheckpoint("trailing bytes in snapshot file");
  return out;
}

void write_dataset_dir(const EnsembleDataset& ds, const std::filesystem::path& dir) {
  const bool has_vel = ds.config.order == Order::kSecond;
  Json cfg = dataset_header(ds);
  const std::string cfg_text = cfg.dump(2) + "\n";
  write_file(dir / "config.json", cfg_text);
  Json files = Json::object();
  files["config.json"] = sha256_hex(cfg_text);
  std::vector<uint64_t> seeds;
  for (int r = 0; r < ds.replica_count; ++r) {
    const std::string name = "snapshots/replica_" + std::to_string(r) + ".bin";
    const std::string bytes = encode_snapshots(ds.snapshots[r], ds.config.N, ds.config.d, has_vel);
    write_file(dir / name, bytes);
    files[name] = sha256_hex(bytes);
    seeds.push_back(ds.seed_of(r));
  }
  const Json manifest{{"config_hash", ds.config_hash},
                      {"seeds", seeds},
                      {"snapshot_times", ds.snapshot_times},
                      {"snapshot_steps", ds.snapshot_steps},
                      {"files", files}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

EnsembleDataset read_dataset_dir(const std::filesystem::path& dir) {
  const std::string cfg_text = read_file(dir / "config.json");
  const Json manifest = Json::parse(read_file(dir / "manifest.json"));
  const Json& files = manifest.at("files");
  if (files.value("config.json", "") != sha256_hex(cfg_text)) throw CorruptCheckpoint("config.json hash mismatch");
  EnsembleDataset ds;
  apply_header(ds, Json::parse(cfg_text));
  ds.snapshots.resize(ds.replica_count);
  ds.states.resize(ds.replica_count);
  for (int r = 0; r < ds.replica_count; ++r) {
    const std::string name = "snapshots/replica_" + std::to_string(r) + ".bin";
    const std::string bytes = read_file(dir / name);
    if (files.value(name, "") != sha256_hex(bytes)) throw CorruptCheckpoint(name + " hash mismatch");
    int n, d;
    bool has_vel;
    ds.snapshots[r] = decode_snapshots(bytes, n, d, has_vel);
    if (n != ds.config.N || d != ds.config.d) throw CorruptCheckpoint(name + " does not match config.json");
    if (ds.snapshots[r].size() != ds.snapshot_times.size())
      throw CorruptCheckpoint(name + " has the wrong number of snapshots");
    const Snapshot& last = ds.snapshots[r].back();
    ds.states[r] = ParticleState{d, last.positions, last.velocities, last.time, RngState{ds.seed_of(r), last.step}};
  }
  return ds;
}

}  // namespace meanfield
