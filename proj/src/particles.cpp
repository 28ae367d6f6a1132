#include "meanfield/particles.hpp"

#include <cmath>
#include <limits>

#include "meanfield/errors.hpp"

namespace meanfield {

std::string to_string(Order o) { return o == Order::kSecond ? "second" : "first"; }

Order order_from_string(const std::string& s) {
  if (s == "second") return Order::kSecond;
  if (s == "first") return Order::kFirst;
  throw ConfigError("order must be 'second' or 'first', got '" + s + "'");
}

void to_json(Json& j, const SimConfig& c) {
  j = Json{{"N", c.N},
           {"d", c.d},
           {"sigma", c.sigma},
           {"dt", c.dt},
           {"t_end", c.t_end},
           {"order", to_string(c.order)},
           {"kernel", c.kernel},
           {"seed", c.seed},
           {"snapshot_stride", c.snapshot_stride}};
}

void from_json(const Json& j, SimConfig& c) {
  c = SimConfig{};
  c.N = j.at("N").get<int>();
  c.d = j.at("d").get<int>();
  c.sigma = j.value("sigma", 0.0);
  c.dt = j.at("dt").get<double>();
  c.t_end = j.at("t_end").get<double>();
  c.order = order_from_string(j.value("order", std::string("second")));
  if (j.contains("kernel")) {
    c.kernel = j.at("kernel").get<KernelSpec>();
  } else {
    c.kernel.family = KernelFamily::kZero;
    c.kernel.dim = c.d;
  }
  c.seed = j.value("seed", uint64_t{0});
  c.snapshot_stride = j.value("snapshot_stride", 1);
}

void validate(const SimConfig& c) {
  if (c.N < 1) throw ConfigError("N must be >= 1");
  if (c.d < 1 || c.d > kMaxDim) throw ConfigError("d must be 1, 2 or 3");
  if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw ConfigError("sigma must be finite and >= 0");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError("dt must be positive");
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) throw ConfigError("t_end must be positive");
  if (c.snapshot_stride < 1) throw ConfigError("snapshot_stride must be >= 1");
  if (c.kernel.dim != c.d) throw ConfigError("kernel dimension does not match d");
  if (c.t_end / c.dt > 1e12) throw ConfigError("too many time steps");
}

uint64_t step_count(const SimConfig& c) {
  return static_cast<uint64_t>(std::llround(c.t_end / c.dt));
}

std::vector<double> compute_forces(const ParticleState& state, const Kernel& kernel) {
  const int n = state.N();
  const int d = state.d;
  std::vector<double> forces(size_t(n) * d, 0.0);
  if (n < 2) return forces;
  const double inv_n = 1.0 / n;
  const double* x = state.positions.data();
  // Each pair once, K(-r) = -K(r). Serial and in a fixed order, so the sums do
  // not depend on the thread count; replicas supply the parallelism.
  double r[kMaxDim] = {0.0, 0.0, 0.0};
  double k[kMaxDim];
  for (int i = 0; i < n; ++i) {
    const double* xi = x + size_t(i) * d;
    double* fi = forces.data() + size_t(i) * d;
    for (int j = i + 1; j < n; ++j) {
      const double* xj = x + size_t(j) * d;
      double* fj = forces.data() + size_t(j) * d;
      for (int c = 0; c < d; ++c) r[c] = minimum_image_1d(xi[c] - xj[c]);
      kernel.force_unchecked(r, k);
      for (int c = 0; c < d; ++c) {
        fi[c] += k[c];
        fj[c] -= k[c];
      }
    }
  }
  for (double& f : forces) f *= inv_n;
  return forces;
}

std::vector<double> compute_forces(const ParticleState& state, const KernelSpec& kernel) {
  return compute_forces(state, Kernel(kernel));
}

void step(ParticleState& state, const SimConfig& config, const Kernel& kernel) {
  const int n = state.N();
  const int d = state.d;
  const double dt = config.dt;
  const double noise = config.sigma * std::sqrt(dt);
  const uint64_t step_index = state.rng.step;
  const auto forces = compute_forces(state, kernel);
  const bool second = config.order == Order::kSecond;
  if (second && state.velocities.size() != state.positions.size())
    throw ConfigError("second-order state needs one velocity per position coordinate");

  long long bad = -1;
#pragma omp parallel for schedule(static) reduction(max : bad)
  for (int i = 0; i < n; ++i) {
    double xi[4] = {0.0, 0.0, 0.0, 0.0};
    if (noise > 0.0)
      for (int b = 0; 2 * b < d; ++b) {
        const auto z = normal_pair(state.rng.seed, RngStream::kNoise, step_index, static_cast<uint32_t>(i),
                                   static_cast<uint32_t>(b));
        xi[2 * b] = z[0];
        xi[2 * b + 1] = z[1];
      }
    for (int c = 0; c < d; ++c) {
      const size_t at = size_t(i) * d + c;
      double& x = state.positions[at];
      if (second) {
        double& v = state.velocities[at];
        v += forces[at] * dt + noise * xi[c];
        x = wrap_unit(x + v * dt);
        if (!std::isfinite(v) || !std::isfinite(x)) bad = std::max<long long>(bad, i);
      } else {
        x = wrap_unit(x + forces[at] * dt + noise * xi[c]);
        if (!std::isfinite(x)) bad = std::max<long long>(bad, i);
      }
    }
  }
  state.rng.step = step_index + 1;
  state.time = double(state.rng.step) * dt;
  if (bad >= 0)
    throw NonFiniteState("particle " + std::to_string(bad) + " left the finite range at step " +
                             std::to_string(step_index + 1),
                         -1, step_index + 1, bad);
}

void to_json(Json& j, const EnergyReport& r) {
  j = Json{{"kinetic", r.kinetic},
           {"potential", r.potential},
           {"total", r.total},
           {"collision_floor", r.collision_floor},
           {"log_collision_floor", r.log_collision_floor}};
  j["min_pair_dist"] = std::isfinite(r.min_pair_dist) ? Json(r.min_pair_dist) : Json(nullptr);
}

EnergyReport energy_report(const ParticleState& state, const Kernel& kernel) {
  const int n = state.N();
  const int d = state.d;
  EnergyReport rep;
  for (int i = 0; i < n; ++i) {
    double v2 = 0.0;
    if (state.has_velocities())
      for (int c = 0; c < d; ++c) v2 += state.velocities[size_t(i) * d + c] * state.velocities[size_t(i) * d + c];
    rep.kinetic += 1.0 + v2;
  }
  std::vector<double> row_phi(n, 0.0), row_dist(n, std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    double r[kMaxDim] = {0.0, 0.0, 0.0};
    double phi = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (int j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        r[c] = minimum_image_1d(state.positions[size_t(i) * d + c] - state.positions[size_t(j) * d + c]);
        r2 += r[c] * r[c];
      }
      phi += kernel.potential_unchecked(r);
      dmin = std::min(dmin, r2);
    }
    row_phi[i] = phi;
    row_dist[i] = dmin;
  }
  double phi = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    phi += row_phi[i];
    dmin = std::min(dmin, row_dist[i]);
  }
  rep.potential = 2.0 * phi / n;
  rep.total = rep.kinetic + rep.potential;
  rep.min_pair_dist = std::sqrt(dmin);
  rep.log_collision_floor = -double(n) * rep.total;
  rep.collision_floor = std::exp(rep.log_collision_floor);
  return rep;
}

std::array<double, kMaxDim> total_momentum(const ParticleState& state) {
  std::array<double, kMaxDim> p{};
  if (!state.has_velocities()) return p;
  for (int i = 0; i < state.N(); ++i)
    for (int c = 0; c < state.d; ++c) p[c] += state.velocities[size_t(i) * state.d + c];
  return p;
}

double expected_energy_slope(const SimConfig& config) {
  if (config.order != Order::kSecond) throw ConfigError("the energy slope is defined for the second-order system");
  return double(config.N) * config.d * config.sigma * config.sigma;
}

double energy_slope_per_coordinate(const SimConfig& config) {
  if (config.order != Order::kSecond) throw ConfigError("the energy slope is defined for the second-order system");
  return config.sigma * config.sigma;
}

Snapshot take_snapshot(const ParticleState& state) {
  return Snapshot{state.time, state.rng.step, state.positions, state.velocities};
}

void simulate(ParticleState& state, const SimConfig& config, const Kernel& kernel, const SnapshotSink& sink,
              bool emit_start) {
  validate(config);
  const uint64_t total = step_count(config);
  const auto stride = static_cast<uint64_t>(config.snapshot_stride);
  if (sink && emit_start && state.rng.step % stride == 0) sink(take_snapshot(state), state);
  while (state.rng.step < total) {
    step(state, config, kernel);
    if (sink && state.rng.step % stride == 0) sink(take_snapshot(state), state);
  }
}

}  // namespace meanfield
