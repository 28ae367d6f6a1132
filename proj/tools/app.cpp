#include "app.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "meanfield/ensemble.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/hierarchy.hpp"
#include "meanfield/marginals.hpp"
#include "meanfield/particles.hpp"
#include "meanfield/vlasov.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace meanfield::app {

namespace {

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

template <class T>
T section_value(const Json& s, const char* key) {
  if (!s.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return s.at(key).get<T>();
}

double lambda_for(double q, double sigma, double Lambda, double t) {
  if (Lambda <= 0.0) {
    if (!(sigma > 0.0)) return 0.0;
    Lambda = lambda_min(q, sigma);
  }
  return lambda_schedule(Lambda, t);
}

ParticleState state_of(const Snapshot& s, int d) {
  ParticleState st;
  st.d = d;
  st.positions = s.positions;
  st.velocities = s.velocities;
  st.time = s.time;
  return st;
}

// ---------------------------------------------------------------------------
// PDE helpers shared by solve-pde and compare

struct PdeSolution {
  bool kinetic = true;
  PhaseGrid1D phase;
  SpatialGrid spatial;
  SolverReport report;

  GridDensity tensor(int k, const std::optional<GridSpec>& target) const {
    return kinetic ? tensorize(phase, k, target) : tensorize(spatial, k, target);
  }
};

PdeSolution solve_pde_section(const Json& s, const Kernel& kernel, double sigma, double t_end, double s_v,
                              double eps, int mode) {
  PdeSolution sol;
  const auto kind = s.value("kind", std::string("kinetic"));
  const double dt = section_value<double>(s, "dt");
  if (kind == "kinetic") {
    const int nx = s.value("nx", 128), nv = s.value("nv", nx);
    const double v_max = s.value("v_max", 6.0 * s_v);
    VpfpOptions opt;
    const auto xt = s.value("x_transport", std::string("spectral"));
    if (xt == "cubic_spline") opt.x_transport = XTransport::kCubicSpline;
    else if (xt != "spectral") throw ConfigError("x_transport must be 'spectral' or 'cubic_spline'");
    sol.phase = solve_vpfp_1d(landau_initial(nx, nv, v_max, s_v, eps, mode), kernel, sigma, t_end, dt, &sol.report, opt);
  } else if (kind == "first_order") {
    sol.kinetic = false;
    const int n = s.value("nx", 64);
    sol.spatial = solve_first_order(cosine_initial(n, kernel.dim(), eps, mode), kernel, sigma, t_end, dt, &sol.report);
  } else {
    throw ConfigError("pde kind must be 'kinetic' or 'first_order'");
  }
  return sol;
}

// ---------------------------------------------------------------------------
// presets

KernelSpec smooth_d1() {
  KernelSpec k;
  k.family = KernelFamily::kSmoothFourier;
  k.dim = 1;
  k.strength = 1.0;
  FourierMode m;
  m.wavevector[0] = 1;
  m.amplitude = 1.0;
  k.modes.push_back(m);
  return k;
}

Json law_json(double s, double eps, int mode) {
  return Json{{"kind", "product_gaussian"}, {"velocity_std", s}, {"perturbation", eps}, {"mode", mode}};
}

}  // namespace

std::vector<std::string> preset_names() { return {"bounds_example", "chaos_d1", "coulomb_d2", "first_order_d2"}; }

Json preset(const std::string& name) {
  if (name == "chaos_d1") {
    SimConfig sim;
    sim.N = 256;
    sim.d = 1;
    sim.sigma = 1.0;
    sim.dt = 0.01;
    sim.t_end = 0.5;
    sim.kernel = smooth_d1();
    sim.seed = 1;
    sim.snapshot_stride = 10;
    const Json law = law_json(1.0, 0.5, 1);
    const Json pde = {{"kind", "kinetic"}, {"nx", 128}, {"nv", 128}, {"v_max", 6.0}, {"dt", 1.0 / 800}};
    return Json{
        {"seed", 1},
        {"thread_count", 0},
        {"simulate", {{"sim", sim}, {"replicas", 200}, {"initial_law", law}}},
        {"solve_pde",
         {{"kind", "kinetic"}, {"nx", 128}, {"nv", 128}, {"v_max", 6.0}, {"dt", 1.0 / 800}, {"t_end", 0.5},
          {"sigma", 1.0}, {"velocity_std", 1.0}, {"perturbation", 0.5}, {"mode", 1}, {"kernel", sim.kernel}}},
        {"analyze", {{"time", 0.5}, {"k", 1}, {"grid", GridSpec{1, 1, 64, 64, 6.0}}, {"q", 2.0}, {"Lambda", 0.0}}},
        {"compare",
         {{"sim", sim},
          {"initial_law", law},
          {"replicas", 200},
          {"N_values", {64, 256, 1024}},
          {"time", 0.5},
          {"grid", GridSpec{1, 1, 64, 64, 6.0}},
          {"grid_k2", GridSpec{2, 1, 4, 4, 6.0}},
          {"reference", "pde"},
          {"pde", pde},
          {"q", 2.0},
          {"Lambda", 0.0},
          {"trace_points", 5},
          {"verify_recursion", true}}}};
  }
  if (name == "coulomb_d2") {
    SimConfig sim;
    sim.N = 128;
    sim.d = 2;
    sim.sigma = 0.5;
    sim.dt = 1e-3;
    sim.t_end = 0.5;
    sim.kernel.family = KernelFamily::kCoulomb;
    sim.kernel.dim = 2;
    sim.kernel.strength = 1.0;
    sim.seed = 7;
    sim.snapshot_stride = 50;
    const Json law = law_json(1.0, 0.5, 1);
    auto cmp_sim = sim;
    cmp_sim.t_end = 0.25;
    cmp_sim.snapshot_stride = 250;
    return Json{{"seed", 7},
                {"thread_count", 0},
                {"simulate", {{"sim", sim}, {"replicas", 20}, {"initial_law", law}}},
                {"analyze", {{"time", 0.5}, {"k", 1}, {"grid", GridSpec{1, 2, 16, 0, 6.0}}, {"q", 2.0}}},
                {"compare",
                 {{"sim", cmp_sim},
                  {"initial_law", law},
                  {"replicas", 100},
                  {"N_values", {128, 256, 512}},
                  {"time", 0.25},
                  {"grid", GridSpec{1, 2, 16, 0, 6.0}},
                  {"reference", "self"},
                  {"q", 2.0}}}};
  }
  if (name == "first_order_d2") {
    SimConfig sim;
    sim.N = 256;
    sim.d = 2;
    sim.sigma = 0.5;
    sim.dt = 0.0025;
    sim.t_end = 0.1;
    sim.order = Order::kFirst;
    sim.kernel.family = KernelFamily::kMildPower;
    sim.kernel.dim = 2;
    sim.kernel.power = 0.5;
    sim.seed = 3;
    sim.snapshot_stride = 8;
    const Json law = law_json(1.0, 0.5, 1);
    const Json pde = {{"kind", "first_order"}, {"nx", 64}, {"dt", 0.0025}};
    return Json{{"seed", 3},
                {"thread_count", 0},
                {"simulate", {{"sim", sim}, {"replicas", 20}, {"initial_law", law}}},
                {"solve_pde",
                 {{"kind", "first_order"}, {"nx", 64}, {"dt", 0.0025}, {"t_end", 0.1}, {"sigma", 0.5},
                  {"perturbation", 0.5}, {"mode", 1}, {"kernel", sim.kernel}}},
                {"compare",
                 {{"sim", sim},
                  {"initial_law", law},
                  {"replicas", 20},
                  {"N_values", {64, 256}},
                  {"time", 0.1},
                  {"grid", GridSpec{1, 2, 8, 0, 1.0}},
                  {"reference", "pde"},
                  {"pde", pde}}}};
  }
  if (name == "bounds_example") {
    HierarchyParams p;
    p.L_override = 1.0;
    p.F0 = 1.0;
    p.F = 1.0;
    p.N = 10;
    return Json{{"bounds", p}};
  }
  throw ConfigError("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------

Json run_simulate(const Json& section, const fs::path& out) {
  auto cfg = section_value<SimConfig>(section, "sim");
  const int replicas = section.value("replicas", 1);
  const auto law = section.value("initial_law", Json::object()).get<InitialLaw>();
  validate(cfg);
  const Kernel kernel(cfg.kernel);
  const auto ds = run_ensemble(cfg, replicas, law);

  CsvWriter csv({"time", "mean_total", "stderr_total", "mean_kinetic", "mean_potential", "min_pair_dist",
                 "min_log_margin"});
  std::vector<double> times, mean_total;
  long long floor_violations = 0;
  for (size_t s = 0; s < ds.snapshot_times.size(); ++s) {
    double sum = 0, sum2 = 0, kin = 0, pot = 0, min_pair = std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();
    for (int r = 0; r < replicas; ++r) {
      const auto e = energy_report(state_of(ds.snapshots[size_t(r)][s], cfg.d), kernel);
      sum += e.total;
      sum2 += e.total * e.total;
      kin += e.kinetic;
      pot += e.potential;
      min_pair = std::min(min_pair, e.min_pair_dist);
      if (std::isfinite(e.min_pair_dist)) {
        // log|x_i - x_j| - (-N E): positive when above the collision floor
        const double margin = std::log(e.min_pair_dist) - e.log_collision_floor;
        min_margin = std::min(min_margin, margin);
        if (!(margin > 0.0)) ++floor_violations;
      }
    }
    const double mean = sum / replicas;
    const double var = replicas > 1 ? std::max(0.0, (sum2 - replicas * mean * mean) / (replicas - 1)) : 0.0;
    csv.row(std::vector<double>{ds.snapshot_times[s], mean, std::sqrt(var / replicas), kin / replicas,
                                pot / replicas, min_pair, min_margin});
    times.push_back(ds.snapshot_times[s]);
    mean_total.push_back(mean);
  }
  double slope = 0.0;
  if (times.size() >= 2) {
    double tb = 0, eb = 0;
    for (size_t i = 0; i < times.size(); ++i) tb += times[i], eb += mean_total[i];
    tb /= double(times.size());
    eb /= double(times.size());
    double num = 0, den = 0;
    for (size_t i = 0; i < times.size(); ++i) {
      num += (times[i] - tb) * (mean_total[i] - eb);
      den += (times[i] - tb) * (times[i] - tb);
    }
    slope = num / den;
  }
  Json summary = {{"config_hash", ds.config_hash},
                  {"replicas", replicas},
                  {"N", cfg.N},
                  {"snapshots", ds.snapshot_times.size()},
                  {"fitted_energy_slope", slope},
                  {"collision_floor_violations", floor_violations}};
  if (cfg.order == Order::kSecond) {
    summary["expected_energy_slope"] = expected_energy_slope(cfg);
    summary["energy_slope_per_coordinate"] = energy_slope_per_coordinate(cfg);
  }
  if (!out.empty()) {
    write_dataset_dir(ds, out / "dataset");
    write_file(out / "energy.csv", csv.str());
    write_json(out / "summary.json", summary);
  }
  return summary;
}

Json run_solve_pde(const Json& section, const fs::path& out) {
  const auto ks = section_value<KernelSpec>(section, "kernel");
  const Kernel kernel(ks);
  const double sigma = section.value("sigma", 0.0);
  const double t_end = section_value<double>(section, "t_end");
  const double s_v = section.value("velocity_std", 1.0);
  const auto sol = solve_pde_section(section, kernel, sigma, t_end, s_v, section.value("perturbation", 0.0),
                                     section.value("mode", 1));
  const auto density = sol.tensor(1, std::nullopt);
  Json report = {{"solver", sol.report}, {"kind", sol.kinetic ? "kinetic" : "first_order"}, {"time", t_end}};
  if (!out.empty()) {
    if (sol.kinetic) write_phase_grid(out / "solution.mft", sol.phase);
    else write_spatial_grid(out / "solution.mft", sol.spatial);
    write_density(out / "density.mft", density);
    if (sol.kinetic) {
      CsvWriter csv({"x", "rho"});
      const auto rho = sol.phase.density();
      for (int i = 0; i < sol.phase.nx; ++i) csv.row(std::vector<double>{sol.phase.x_center(i), rho[size_t(i)]});
      write_file(out / "rho.csv", csv.str());
    } else if (sol.spatial.d == 1) {
      write_file(out / "rho.csv", density_csv(density));
    }
    write_json(out / "report.json", report);
  }
  return report;
}

Json run_analyze(const Json& section, const fs::path& out) {
  fs::path dir = section.contains("dataset") ? fs::path(section.at("dataset").get<std::string>()) : out / "dataset";
  if (!fs::exists(dir / "manifest.json")) throw MissingData("no dataset at " + dir.string());
  const auto ds = read_dataset_dir(dir);
  const Kernel kernel(ds.config.kernel);
  const double time = section.value("time", ds.snapshot_times.back());
  const int k = section.value("k", 1);
  auto grid = section_value<GridSpec>(section, "grid");
  grid.k = k;
  const double q = section.value("q", 2.0);
  const auto f = estimate_marginal(ds, k, time, grid);
  const double lambda = lambda_for(q, ds.config.sigma, section.value("Lambda", 0.0), time);
  Json result = {{"time", time},
                 {"k", k},
                 {"truncation_mass", f.truncation_mass},
                 {"lambda", lambda},
                 {"weighted_norm", weighted_lq_norm(f, q, lambda, &kernel, ds.config.N)}};
  if (section.contains("pde")) {
    auto ref = read_density(section.at("pde").get<std::string>());
    if (ref.spec != f.spec) {
      // solver output on a finer grid: rebin through the k=1 product
      if (ref.spec.k != 1) throw GridMismatch("reference density must be a k = 1 density");
      throw GridMismatch("reference grid differs from the analysis grid");
    }
    result["chaos_distance"] = chaos_distance(f, ref, q, lambda, &kernel, ds.config.N);
  }
  if (!out.empty()) {
    write_density(out / "marginal.mft", f);
    if (k == 1) write_file(out / "marginal.csv", density_csv(f));
    write_json(out / "analysis.json", result);
  }
  return result;
}

Json run_bounds(const Json& section, const fs::path& out) {
  const auto p = section.get<HierarchyParams>();
  Json report = bounds_report(p);
  if (section.contains("trace")) report["recursion"] = verify_recursion(section.at("trace").get<RecursionTrace>(),
                                                                         section.value("rel_tol", 1e-6));
  if (!out.empty()) {
    write_json(out / "bounds.json", report);
    CsvWriter csv({"k", "final_marginal_bound", "induction_bound"});
    for (const auto& row : report.at("bounds")) {
      const double ib = row.contains("induction_bound") ? row.at("induction_bound").get<double>()
                                                        : std::numeric_limits<double>::quiet_NaN();
      csv.row(std::vector<double>{double(row.at("k").get<int>()), row.at("final_marginal_bound").get<double>(), ib});
    }
    write_file(out / "bounds.csv", csv.str());
  }
  return report;
}

Json run_compare(const Json& section, const fs::path& out) {
  auto base = section_value<SimConfig>(section, "sim");
  const auto law = section.value("initial_law", Json::object()).get<InitialLaw>();
  const int replicas = section.value("replicas", 1);
  const auto Ns = section_value<std::vector<int>>(section, "N_values");
  if (Ns.empty()) throw ConfigError("N_values must not be empty");
  const double time = section.value("time", base.t_end);
  const auto g1 = section_value<GridSpec>(section, "grid");
  std::optional<GridSpec> g2;
  if (section.contains("grid_k2")) g2 = section.at("grid_k2").get<GridSpec>();
  const auto reference = section.value("reference", std::string("pde"));
  const int trace_points = section.value("trace_points", 1);
  const double q = section.value("q", 2.0);
  const double Lambda = section.value("Lambda", 0.0);
  const bool recursion = section.value("verify_recursion", false);
  if (recursion && !g2) throw ConfigError("verify_recursion needs grid_k2");

  const auto steps = static_cast<long long>(std::llround(time / base.dt));
  if (steps < 1 || std::abs(double(steps) * base.dt - time) > 1e-9 * std::max(1.0, time))
    throw ConfigError("compare time must be a positive multiple of dt");
  if (trace_points < 1 || steps % trace_points != 0) throw ConfigError("trace_points must divide the step count");
  base.t_end = time;
  base.snapshot_stride = int(steps / trace_points);
  const Kernel kernel(base.kernel);

  std::optional<PdeSolution> pde;
  GridDensity ref1, ref2;
  if (reference == "pde") {
    if (!section.contains("pde")) throw ConfigError("reference 'pde' needs a pde section");
    pde = solve_pde_section(section.at("pde"), kernel, base.sigma, time, law.velocity_std, law.perturbation, law.mode);
    ref1 = pde->tensor(1, g1);
    if (g2) ref2 = pde->tensor(2, g2);
  } else if (reference != "self") {
    throw ConfigError("reference must be 'pde' or 'self'");
  }

  double L = 0.0;
  if (recursion) {
    HierarchyParams hp;
    hp.q = q;
    hp.p = q / (q - 1.0);
    hp.d = base.d;
    hp.sigma = base.sigma;
    hp.Lambda = Lambda;
    hp.K_lp_norm = estimate_kernel_norms(kernel, hp.p, 1.0, 256).lp_norm;
    L = growth_constant(hp);
  }

  std::vector<int> runs = Ns;
  if (reference == "self")
    for (int N : Ns) runs.push_back(2 * N);
  std::sort(runs.begin(), runs.end());
  runs.erase(std::unique(runs.begin(), runs.end()), runs.end());

  struct Measured {
    GridDensity f1, f2;
    WeightedNormReport norm;
    std::optional<RecursionReport> rec;
  };
  std::map<int, Measured> measured;
  for (int N : runs) {
    auto cfg = base;
    cfg.N = N;
    const auto ds = run_ensemble(cfg, replicas, law);
    Measured m;
    m.f1 = estimate_marginal(ds, 1, time, g1);
    if (g2) m.f2 = estimate_marginal(ds, 2, time, *g2);
    const double lam = lambda_for(q, base.sigma, Lambda, time);
    m.norm = weighted_lq_norm(m.f1, q, lam, &kernel, N);
    if (recursion) {
      RecursionTrace trace;
      trace.k_min = 1;
      trace.L_used = L;
      trace.values.assign(2, {});
      for (double t : ds.snapshot_times) {
        const double lt = lambda_for(q, base.sigma, Lambda, t);
        trace.times.push_back(t);
        trace.values[0].push_back(weighted_lq_norm(estimate_marginal(ds, 1, t, g1), q, lt, &kernel, N).value);
        trace.values[1].push_back(weighted_lq_norm(estimate_marginal(ds, 2, t, *g2), q, lt, &kernel, N).value);
      }
      m.rec = verify_recursion(trace, 0.1);
    }
    measured.emplace(N, std::move(m));
  }

  Json rows = Json::array();
  CsvWriter csv({"N", "l1_k1", "lq_k1", "l1_k2", "weighted_lq", "recursion_holds"});
  std::vector<double> l1, l1k2, norms;
  for (int N : Ns) {
    const auto& m = measured.at(N);
    ChaosDistance d1, d2;
    if (reference == "pde") {
      d1 = chaos_distance(m.f1, ref1, q);
      if (g2) d2 = chaos_distance(m.f2, ref2, q);
    } else {
      const auto& other = measured.at(2 * N);
      d1 = chaos_distance(m.f1, other.f1, q);
      if (g2) d2 = chaos_distance(m.f2, other.f2, q);
    }
    Json row = {{"N", N},
                {"l1_k1", d1.l1},
                {"lq_k1", d1.lq},
                {"weighted_lq", m.norm.value},
                {"truncation_mass", m.f1.truncation_mass}};
    if (g2) row["l1_k2"] = d2.l1;
    if (m.rec) {
      row["recursion"] = {{"all_hold", m.rec->all_hold}, {"worst_margin", m.rec->worst_margin}};
      Json xs = Json::array();
      for (const auto& c : m.rec->checks) xs.push_back({{"k", c.k}, {"t", c.t}, {"X", c.lhs}, {"rhs", c.rhs}});
      row["trace"] = xs;
    }
    rows.push_back(row);
    csv.row(std::vector<double>{double(N), d1.l1, d1.lq, g2 ? d2.l1 : std::numeric_limits<double>::quiet_NaN(),
                                m.norm.value, m.rec ? double(m.rec->all_hold) : std::numeric_limits<double>::quiet_NaN()});
    l1.push_back(d1.l1);
    l1k2.push_back(d2.l1);
    norms.push_back(m.norm.value);
  }
  auto decreasing = [](const std::vector<double>& v) {
    for (size_t i = 1; i < v.size(); ++i)
      if (!(v[i] < v[i - 1])) return false;
    return true;
  };
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  Json result = {{"reference", reference},
                 {"time", time},
                 {"replicas", replicas},
                 {"rows", rows},
                 {"l1_k1_decreasing", decreasing(l1)},
                 {"weighted_norm_ratio", *hi / *lo}};
  if (g2) result["l1_k2_decreasing"] = decreasing(l1k2);
  if (recursion) result["L"] = L;
  if (pde) result["pde_report"] = pde->report;
  if (!out.empty()) {
    write_file(out / "convergence.csv", csv.str());
    write_json(out / "compare.json", result);
  }
  return result;
}

// ---------------------------------------------------------------------------
// plots

namespace {

std::vector<std::map<std::string, double>> read_csv_numeric(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, double>> rows;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      out.push_back(cell);
    }
    return out;
  };
  if (!std::getline(in, line)) throw MissingData(path.string() + " is empty");
  header = split(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    std::map<std::string, double> row;
    for (size_t i = 0; i < header.size() && i < cells.size(); ++i) {
      try {
        row[header[i]] = std::stod(cells[i]);
      } catch (const std::exception&) {
        row[header[i]] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> column(const std::vector<std::map<std::string, double>>& rows, const std::string& key) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.count(key) ? r.at(key) : std::numeric_limits<double>::quiet_NaN());
  return v;
}

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingData("no results directory at " + dir.string());
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& svg) {
    write_file(dir / name, svg);
    written.push_back(dir / name);
  };
  if (fs::exists(dir / "energy.csv")) {
    const auto rows = read_csv_numeric(dir / "energy.csv");
    const auto t = column(rows, "time"), e = column(rows, "mean_total");
    std::vector<svg::Series> series{{"mean e_N(t)", t, e, false}};
    if (fs::exists(dir / "summary.json")) {
      const auto summary = read_json(dir / "summary.json");
      if (summary.contains("expected_energy_slope") && !t.empty()) {
        const double slope = summary.at("expected_energy_slope").get<double>();
        std::vector<double> line;
        for (double ti : t) line.push_back(e.front() + slope * (ti - t.front()));
        series.push_back({"expected slope " + format_double(slope), t, line, true});
      }
    }
    emit("energy.svg", svg::line_plot({"Ensemble energy", "t", "e_N", false, false}, series));
  }
  if (fs::exists(dir / "rho.csv")) {
    const auto rows = read_csv_numeric(dir / "rho.csv");
    const std::string xk = rows.empty() || rows.front().count("x") ? "x" : "x1";
    const std::string yk = rows.empty() || rows.front().count("rho") ? "rho" : "density";
    emit("rho.svg", svg::line_plot({"Spatial density", "x", "rho", false, false},
                                   {{"rho(x)", column(rows, xk), column(rows, yk), false}}));
  }
  if (fs::exists(dir / "density.mft")) {
    const auto f = read_density(dir / "density.mft");
    if (f.spec.k == 1 && f.spec.d == 1 && f.spec.has_velocity())
      emit("phase_space.svg", svg::heatmap({"Phase-space density", "x", "v", false, false}, f.spec.x_bins,
                                           f.spec.v_bins, f.values, 0.0, 1.0, -f.spec.v_max, f.spec.v_max));
    else if (f.spec.k == 1 && f.spec.d == 2 && !f.spec.has_velocity())
      emit("phase_space.svg", svg::heatmap({"Spatial density", "x1", "x2", false, false}, f.spec.x_bins,
                                           f.spec.x_bins, f.values, 0.0, 1.0, 0.0, 1.0));
  }
  if (fs::exists(dir / "convergence.csv")) {
    const auto rows = read_csv_numeric(dir / "convergence.csv");
    const auto n = column(rows, "N");
    std::vector<svg::Series> series{{"L1 distance, k = 1", n, column(rows, "l1_k1"), false}};
    const auto k2 = column(rows, "l1_k2");
    if (std::any_of(k2.begin(), k2.end(), [](double v) { return std::isfinite(v); }))
      series.push_back({"L1 distance, k = 2", n, k2, false});
    emit("convergence.svg", svg::line_plot({"Chaos distance against N", "N", "distance", true, true}, series));
  }
  if (fs::exists(dir / "bounds.csv")) {
    const auto rows = read_csv_numeric(dir / "bounds.csv");
    const auto k = column(rows, "k");
    std::vector<svg::Series> series{{"final marginal bound", k, column(rows, "final_marginal_bound"), false},
                                    {"induction bound", k, column(rows, "induction_bound"), true}};
    if (fs::exists(dir / "compare.json")) {
      // measured X_k at the final time, when a comparison run sits alongside
      const auto cmp = read_json(dir / "compare.json");
      std::vector<double> kk, xx;
      if (!cmp.at("rows").empty() && cmp.at("rows").back().contains("trace"))
        for (const auto& c : cmp.at("rows").back().at("trace"))
          if (c.at("t").get<double>() == cmp.at("time").get<double>()) {
            kk.push_back(c.at("k").get<double>());
            xx.push_back(c.at("X").get<double>());
          }
      if (!kk.empty()) series.push_back({"measured X_k", kk, xx, false});
    }
    emit("bounds.svg", svg::line_plot({"Marginal bounds", "k", "bound", false, true}, series));
  }
  if (written.empty()) throw MissingData("no recognized data files in " + dir.string());
  return written;
}

// ---------------------------------------------------------------------------
// manifest

void write_manifest(const fs::path& dir, const std::string& command, const Json& config) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      const auto rel = fs::relative(e.path(), dir).generic_string();
      if (rel != "manifest.json") files.push_back(rel);
    }
  std::sort(files.begin(), files.end());
  Json list = Json::array();
  for (const auto& f : files)
    list.push_back({{"path", f}, {"sha256", sha256_file(dir / f)}, {"bytes", fs::file_size(dir / f)}});
  write_json(dir / "manifest.json", Json{{"command", command},
                                         {"code_version", kCodeVersion},
                                         {"config_hash", content_hash(config)},
                                         {"config", config},
                                         {"files", list}});
}

Json verify_manifest(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw MissingData("no manifest.json in " + dir.string());
  const auto manifest = read_json(dir / "manifest.json");
  Json mismatches = Json::array();
  int verified = 0;
  for (const auto& f : manifest.at("files")) {
    const auto path = dir / f.at("path").get<std::string>();
    if (!fs::exists(path)) {
      mismatches.push_back({{"path", f.at("path")}, {"reason", "missing"}});
      continue;
    }
    if (sha256_file(path) != f.at("sha256").get<std::string>()) {
      mismatches.push_back({{"path", f.at("path")}, {"reason", "hash mismatch"}});
      continue;
    }
    ++verified;
  }
  return Json{{"verified", verified}, {"mismatches", mismatches}};
}

// ---------------------------------------------------------------------------
// command line

namespace {

Json builtin_checks() {
  Json checks = Json::array();
  auto add = [&](const std::string& name, bool ok, double value) {
    checks.push_back({{"name", name}, {"ok", ok}, {"value", value}});
  };
  add("existence_time(L=1, F0=F=1) = 0.25", existence_time(1.0, 1.0, 1.0) == 0.25, existence_time(1.0, 1.0, 1.0));
  {
    const Kernel k(smooth_d1());
    double worst = 0.0;
    for (double x : {-0.41, -0.2, 0.13, 0.37}) {
      const double h = 1e-5;
      const double a[1] = {x + h}, b[1] = {x - h}, r[1] = {x};
      double f[1];
      k.force_unchecked(r, f);
      worst = std::max(worst, std::abs(f[0] + (k.potential(a) - k.potential(b)) / (2 * h)));
    }
    add("smooth kernel force = -grad potential", worst <= 1e-6, worst);
  }
  {
    KernelSpec zs;
    zs.dim = 1;
    const auto f = solve_first_order(cosine_initial(32, 1, 0.3, 1), Kernel(zs), 0.5, 0.1, 0.01);
    const double decay = std::exp(-0.5 * 0.25 * 4 * std::numbers::pi * std::numbers::pi * 0.1);
    double worst = 0.0;
    for (int i = 0; i < 32; ++i)
      worst = std::max(worst, std::abs(f.f[size_t(i)] - (1 + 0.3 * decay * std::cos(2 * std::numbers::pi * (i + 0.5) / 32))));
    add("heat flow mode decay", worst <= 1e-8, worst);
  }
  return checks;
}

void error_record(std::ostream& err, const std::string& kind, const std::string& message, int code,
                  const Json& extra = Json::object()) {
  Json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Mean-field interacting particle experiments", "meanfield"};
  cli.require_subcommand(1);
  std::string config_path, preset_name, out_dir, n_list;
  bool plots = false;
  int threads = 0;
  struct Command {
    const char* name;
    const char* section;
    const char* help;
  };
  const Command commands[] = {{"simulate", "simulate", "Run a particle ensemble"},
                              {"solve-pde", "solve_pde", "Solve the mean-field PDE"},
                              {"analyze", "analyze", "Estimate marginals and weighted norms from a dataset"},
                              {"bounds", "bounds", "Evaluate the hierarchy bounds"},
                              {"compare", "compare", "Chaos distance against N"},
                              {"selftest", "", "Re-verify manifest hashes and run built-in checks"}};
  for (const auto& c : commands) {
    auto* sub = cli.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "Experiment configuration (JSON)");
    sub->add_option("--preset", preset_name, "Built-in configuration")->check(CLI::IsMember(preset_names()));
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_flag("--plots", plots, "Write SVG plots");
    sub->add_option("--threads", threads, "Worker threads (0 = automatic)");
    sub->add_option("--N", n_list, "Particle count(s), comma separated");
  }

  std::vector<std::string> argv_store{"meanfield"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    cli.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << cli.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_record(err, "ConfigError", e.what(), 2);
    return 2;
  }

  const auto* sub = cli.get_subcommands().front();
  const std::string command = sub->get_name();
  const std::string section_name = std::find_if(std::begin(commands), std::end(commands), [&](const Command& c) {
                                     return command == c.name;
                                   })->section;
  try {
    if (command == "selftest") {
      Json report = {{"checks", builtin_checks()}};
      bool ok = std::all_of(report["checks"].begin(), report["checks"].end(),
                            [](const Json& c) { return c.at("ok").get<bool>(); });
      if (!out_dir.empty()) {
        report["manifest"] = verify_manifest(out_dir);
        ok = ok && report["manifest"]["mismatches"].empty();
      }
      report["ok"] = ok;
      out << report.dump(2) << "\n";
      return ok ? 0 : 1;
    }

    Json config;
    if (!config_path.empty()) config = read_json(config_path);
    else if (!preset_name.empty()) config = preset(preset_name);
    else throw ConfigError("give --config or --preset");
    if (!config.contains(section_name)) throw ConfigError("configuration has no '" + section_name + "' section");
    Json section = config.at(section_name);

    if (out_dir.empty()) out_dir = config.value("output_dir", std::string());
    if (out_dir.empty()) throw ConfigError("no output directory (--out or output_dir)");
    if (threads <= 0) threads = config.value("thread_count", 0);
    if (threads > 0) omp_set_num_threads(threads);

    std::vector<int> Ns;
    if (!n_list.empty()) {
      std::istringstream ns(n_list);
      std::string tok;
      while (std::getline(ns, tok, ',')) {
        try {
          Ns.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw ConfigError("--N expects comma-separated integers");
        }
      }
    }
    if (config.contains("seed") && section.contains("sim")) section["sim"]["seed"] = config.at("seed");
    if (!Ns.empty()) {
      if (command == "compare") section["N_values"] = Ns;
      else if (section.contains("sim")) section["sim"]["N"] = Ns.front();
      else throw ConfigError("--N does not apply to " + command);
    }
    config[section_name] = section;

    fs::create_directories(out_dir);
    write_json(fs::path(out_dir) / "config.json", config);
    Json summary;
    if (command == "simulate") summary = run_simulate(section, out_dir);
    else if (command == "solve-pde") summary = run_solve_pde(section, out_dir);
    else if (command == "analyze") summary = run_analyze(section, out_dir);
    else if (command == "bounds") summary = run_bounds(section, out_dir);
    else summary = run_compare(section, out_dir);
    if (plots) emit_plots(out_dir);
    write_manifest(out_dir, command, config);
    out << summary.dump(2) << "\n";
    return 0;
  } catch (const NonFiniteState& e) {
    error_record(err, e.kind(), e.what(), e.exit_code(),
                 {{"replica", e.replica()}, {"step", e.step()}, {"particle", e.particle()}});
    return e.exit_code();
  } catch (const Error& e) {
    error_record(err, e.kind(), e.what(), e.exit_code());
    return e.exit_code();
  } catch (const Json::exception& e) {
    error_record(err, "ConfigError", e.what(), 2);
    return 2;
  } catch (const fs::filesystem_error& e) {
    error_record(err, "ConfigError", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    error_record(err, "InternalError", e.what(), 1);
    return 1;
  }
}

}  // namespace meanfield::app
