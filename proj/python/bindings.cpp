#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "jamfield/config.hpp"
#include "jamfield/harness.hpp"

namespace py = pybind11;
using namespace jamfield;

namespace {

Position to_position(const std::vector<double>& v) { return Position(v); }

std::vector<Position> to_positions(const std::vector<std::vector<double>>& xs) {
  std::vector<Position> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.emplace_back(x);
  return out;
}

std::vector<double> coords(const Position& p) { return {p.coords().begin(), p.coords().end()}; }

JammerParams jammer(const std::vector<double>& theta, double p0_dbw, double gamma) {
  JammerParams jp{to_position(theta), p0_dbw, gamma};
  jp.validate();
  return jp;
}

BuildingMap building_map(const std::vector<std::vector<std::vector<double>>>& polygons,
                         double reflection_loss_db, int max_reflections) {
  BuildingMap map;
  map.reflection_loss_db = reflection_loss_db;
  map.max_reflections = max_reflections;
  for (const auto& poly : polygons) {
    Polygon p;
    for (const auto& v : poly) {
      if (v.size() != 2) throw std::invalid_argument("polygon vertices must be [x, y]");
      p.vertices.push_back({v[0], v[1]});
    }
    map.polygons.push_back(std::move(p));
  }
  return map;
}

py::dict sweep_to_dict(const SweepResult& r) {
  py::list cells;
  for (const auto& c : r.cells) {
    py::dict d;
    d["estimator"] = c.estimator;
    d["inr_db"] = c.inr_db;
    d["rmse_m"] = c.rmse;
    d["converged_frac"] = c.converged_frac;
    d["mean_ms"] = c.mean_ms;
    cells.append(d);
  }
  py::dict out;
  out["estimators"] = r.estimators;
  out["inr_grid_db"] = r.inr_grid_db;
  out["crb_rmse_m"] = r.crb_rmse;
  out["cells"] = cells;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Jammer localization: pathloss model, ray tracer, Cramer-Rao bounds and estimators";
  m.attr("CONFIG_SCHEMA_VERSION") = kConfigSchemaVersion;

  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", PyExc_ValueError);

  m.def("sigma_from_inr", &sigma_from_inr, py::arg("p0_dbw"), py::arg("inr_db"));

  m.def(
      "clamped_rss",
      [](const std::vector<double>& x, const std::vector<double>& theta, double p0_dbw, double gamma,
         double d_far) { return clamped_rss(to_position(x), jammer(theta, p0_dbw, gamma), d_far); },
      py::arg("x"), py::arg("theta"), py::arg("p0_dbw") = 10.0, py::arg("gamma") = 2.0,
      py::arg("d_far") = kDefaultFarField);

  m.def(
      "clamped_rss_grad_theta",
      [](const std::vector<double>& x, const std::vector<double>& theta, double p0_dbw, double gamma,
         double d_far) {
        return clamped_rss_grad_theta(to_position(x), jammer(theta, p0_dbw, gamma), d_far);
      },
      py::arg("x"), py::arg("theta"), py::arg("p0_dbw") = 10.0, py::arg("gamma") = 2.0,
      py::arg("d_far") = kDefaultFarField);

  m.def(
      "fim_pathloss",
      [](const std::vector<std::vector<double>>& observers, const std::vector<double>& theta,
         double sigma, double gamma) -> Eigen::MatrixXd {
        return fim_pathloss(to_positions(observers), jammer(theta, 10.0, gamma), sigma).entries;
      },
      py::arg("observers"), py::arg("theta"), py::arg("sigma"), py::arg("gamma") = 2.0);

  m.def(
      "crb_2d",
      [](const std::vector<std::vector<double>>& observers, const std::vector<double>& theta,
         double sigma, double gamma) {
        const auto r = crb_2d(to_positions(observers), jammer(theta, 10.0, gamma), sigma);
        return py::make_tuple(r.variance, r.rmse_bound);
      },
      py::arg("observers"), py::arg("theta"), py::arg("sigma"), py::arg("gamma") = 2.0,
      "Per-axis variance bound and its square root.");

  m.def(
      "raytrace_rss",
      [](const std::vector<double>& x, const std::vector<double>& theta,
         const std::vector<std::vector<std::vector<double>>>& polygons, double reflection_loss_db,
         int max_reflections, double p0_dbw, double gamma) {
        return raytrace_rss(to_position(x), jammer(theta, p0_dbw, gamma),
                            building_map(polygons, reflection_loss_db, max_reflections));
      },
      py::arg("x"), py::arg("theta"), py::arg("polygons"), py::arg("reflection_loss_db") = 6.0,
      py::arg("max_reflections") = 4, py::arg("p0_dbw") = 10.0, py::arg("gamma") = 2.0);

  m.def("mlp_parameter_count",
        [](const std::vector<std::size_t>& layers) { return MlpParams::parameter_count(layers); },
        py::arg("layer_sizes"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_static("load", &load_experiment_config, py::arg("path"))
      .def_static("parse", &parse_experiment_config, py::arg("text"))
      .def("dump", &dump_experiment_config)
      .def_readwrite("inr_grid_db", &ExperimentConfig::inr_grid_db)
      .def_readwrite("n_mc", &ExperimentConfig::n_mc)
      .def_readwrite("master_seed", &ExperimentConfig::master_seed)
      .def_readwrite("workers", &ExperimentConfig::workers)
      .def_readwrite("record_timing", &ExperimentConfig::record_timing)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_property_readonly("estimator_names",
                             [](const ExperimentConfig& c) {
                               std::vector<std::string> names;
                               for (const auto& e : c.estimators) names.push_back(e.label());
                               return names;
                             })
      .def(
          "keep_estimators",
          [](ExperimentConfig& c, const std::vector<std::string>& names) {
            std::erase_if(c.estimators, [&](const EstimatorSpec& e) {
              return std::find(names.begin(), names.end(), e.label()) == names.end();
            });
          },
          py::arg("names"), "Drop every estimator whose label is not listed.");

  m.def("crb_table", &crb_table, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "run_sweep",
      [](const ExperimentConfig& cfg, std::optional<std::filesystem::path> out_dir) {
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = run_sweep(cfg);
          if (out_dir) emit_outputs(r, *out_dir);
        }
        return sweep_to_dict(r);
      },
      py::arg("config"), py::arg("out_dir") = py::none(),
      "Runs the Monte Carlo sweep; writes results.csv and plots when out_dir is given.");

  m.def(
      "dataset",
      [](const ExperimentConfig& cfg, std::size_t realization, double inr_db) {
        ScenarioConfig sc = cfg.scenario;
        sc.rng_seed = realization_seed(cfg.master_seed, realization);
        sc.inr_db = inr_db;
        const auto d = generate_dataset(sc);
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        for (const auto& o : d.observations) {
          xs.push_back(coords(o.x));
          ys.push_back(o.y_dbw);
        }
        py::dict out;
        out["positions"] = xs;
        out["rss_dbw"] = ys;
        out["sigma"] = d.sigma;
        return out;
      },
      py::arg("config"), py::arg("realization") = 0, py::arg("inr_db") = 20.0);

  m.def(
      "estimate",
      [](const ExperimentConfig& cfg, std::size_t realization, double inr_db) {
        ScenarioConfig sc = cfg.scenario;
        sc.rng_seed = realization_seed(cfg.master_seed, realization);
        sc.inr_db = inr_db;
        std::vector<std::string> reports;
        py::gil_scoped_release release;
        const auto data = generate_dataset(sc);
        const KnownPhysics known{sc.jammer.p0_dbw, sc.jammer.gamma};
        for (const auto& spec : cfg.estimators) {
          reports.push_back(report_to_json(run_estimator(data, spec, known, sc.d_far)));
        }
        return reports;
      },
      py::arg("config"), py::arg("realization") = 0, py::arg("inr_db") = 20.0,
      "EstimateReport of every configured estimator, as JSON text.");
}
