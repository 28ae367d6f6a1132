#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "app.hpp"
#include "meanfield/ensemble.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/hierarchy.hpp"
#include "meanfield/marginals.hpp"
#include "meanfield/particles.hpp"
#include "meanfield/vlasov.hpp"

namespace py = pybind11;
using namespace meanfield;

// Structured arguments cross the boundary as JSON text; the Python wrapper
// converts to and from dicts.

namespace {

py::array_t<double> to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  py::array_t<double> a(shape);
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<double> as_point(const py::array_t<double, py::array::c_style | py::array::forcecast>& r) {
  return std::vector<double>(r.data(), r.data() + r.size());
}

py::dict density_dict(const GridDensity& f) {
  py::dict d;
  d["spec"] = Json(f.spec).dump();
  d["values"] = to_array(f.values, {py::ssize_t(f.values.size())});
  d["truncation_mass"] = f.truncation_mass;
  d["time"] = f.time;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the meanfield package";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyObject* type = base.ptr();
      if (dynamic_cast<const ConfigError*>(&e)) type = config_error.ptr();
      else if (dynamic_cast<const NumericalError*>(&e)) type = numerical.ptr();
      PyErr_SetString(type, e.what());
    } catch (const Json::exception& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    }
  });

  m.def("kernel_potential", [](const std::string& spec, const py::array_t<double, py::array::c_style | py::array::forcecast>& r) {
    const Kernel k(Json::parse(spec).get<KernelSpec>());
    const auto p = as_point(r);
    return k.potential(p);
  });
  m.def("kernel_force", [](const std::string& spec, const py::array_t<double, py::array::c_style | py::array::forcecast>& r) {
    const Kernel k(Json::parse(spec).get<KernelSpec>());
    const auto p = as_point(r);
    const auto f = k.force(p);
    return to_array(std::vector<double>(f.begin(), f.begin() + k.dim()), {k.dim()});
  });

  m.def(
      "run_ensemble",
      [](const std::string& config, int replicas, const std::string& law) {
        const auto cfg = Json::parse(config).get<SimConfig>();
        const auto ds = run_ensemble(cfg, replicas, Json::parse(law).get<InitialLaw>());
        const auto S = py::ssize_t(ds.snapshot_times.size());
        std::vector<double> pos, vel;
        for (const auto& rep : ds.snapshots)
          for (const auto& s : rep) {
            pos.insert(pos.end(), s.positions.begin(), s.positions.end());
            vel.insert(vel.end(), s.velocities.begin(), s.velocities.end());
          }
        py::dict out;
        out["times"] = to_array(ds.snapshot_times, {S});
        out["positions"] = to_array(pos, {replicas, S, cfg.N, cfg.d});
        if (!vel.empty()) out["velocities"] = to_array(vel, {replicas, S, cfg.N, cfg.d});
        out["config_hash"] = ds.config_hash;
        return out;
      },
      py::arg("config"), py::arg("replicas"), py::arg("law"));

  m.def("estimate_marginal", [](const std::string& config, int replicas, const std::string& law, int k, double time,
                                const std::string& grid) {
    auto cfg = Json::parse(config).get<SimConfig>();
    const auto ds = run_ensemble(cfg, replicas, Json::parse(law).get<InitialLaw>());
    return density_dict(estimate_marginal(ds, k, time, Json::parse(grid).get<GridSpec>()));
  });

  m.def("solve_vpfp_1d", [](const std::string& kernel, int nx, int nv, double v_max, double s, double eps, int mode,
                            double sigma, double t_end, double dt) {
    SolverReport rep;
    const auto f = solve_vpfp_1d(landau_initial(nx, nv, v_max, s, eps, mode),
                                 Kernel(Json::parse(kernel).get<KernelSpec>()), sigma, t_end, dt, &rep);
    return py::make_tuple(to_array(f.f, {nx, nv}), Json(rep).dump());
  });

  m.def("lambda_min", &lambda_min, py::arg("q"), py::arg("sigma"));
  m.def("existence_time", &existence_time, py::arg("L"), py::arg("F0"), py::arg("F"));
  m.def("final_marginal_bound", &final_marginal_bound, py::arg("k"), py::arg("N"), py::arg("F0"), py::arg("F"),
        py::arg("L"), py::arg("t"));
  m.def(
      "induction_bound", [](int k, int mm, double t, double F0, double L) { return induction_bound(k, mm, t, F0, L); },
      py::arg("k"), py::arg("m"), py::arg("t"), py::arg("F0"), py::arg("L"));
  m.def("bounds_report", [](const std::string& params) {
    return bounds_report(Json::parse(params).get<HierarchyParams>()).dump();
  });
  m.def("preset", [](const std::string& name) { return app::preset(name).dump(); });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = app::run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
