#include "jamfield/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace jamfield {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Position read_position(const json& j) { return Position(j.get<std::vector<double>>()); }

Polygon read_polygon(const json& j) {
  Polygon p;
  for (const auto& v : j) {
    const auto xy = v.get<std::vector<double>>();
    if (xy.size() != 2) throw std::invalid_argument("polygon vertices must be [x, y]");
    p.vertices.push_back({xy[0], xy[1]});
  }
  return p;
}

BuildingMap read_buildings(const json& j) {
  reject_unknown(j, {"reflection_loss_db", "max_reflections", "floor_dbw", "polygons", "rectangles"},
                 "scenario.buildings");
  BuildingMap m;
  read_opt(j, "reflection_loss_db", m.reflection_loss_db);
  read_opt(j, "max_reflections", m.max_reflections);
  read_opt(j, "floor_dbw", m.floor_dbw);
  if (j.contains("polygons")) {
    for (const auto& p : j.at("polygons")) m.polygons.push_back(read_polygon(p));
  }
  if (j.contains("rectangles")) {
    for (const auto& r : j.at("rectangles")) {
      const auto b = r.get<std::vector<double>>();
      if (b.size() != 4 || !(b[2] > b[0]) || !(b[3] > b[1])) {
        throw std::invalid_argument("rectangles are [xmin, ymin, xmax, ymax] with positive extent");
      }
      m.polygons.push_back({{{b[0], b[1]}, {b[2], b[1]}, {b[2], b[3]}, {b[0], b[3]}}});
    }
  }
  return m;
}

ScenarioConfig read_scenario(const json& j) {
  reject_unknown(j, {"jammer", "area", "n_samples", "top_k", "d_far", "regime", "buildings"},
                 "scenario");
  ScenarioConfig s;
  if (j.contains("jammer")) {
    const auto& jj = j.at("jammer");
    reject_unknown(jj, {"position", "p0_dbw", "gamma"}, "scenario.jammer");
    if (jj.contains("position")) s.jammer.theta = read_position(jj.at("position"));
    read_opt(jj, "p0_dbw", s.jammer.p0_dbw);
    read_opt(jj, "gamma", s.jammer.gamma);
  }
  if (j.contains("area")) {
    const auto& a = j.at("area");
    reject_unknown(a, {"min", "max"}, "scenario.area");
    s.area.min = a.at("min").get<std::vector<double>>();
    s.area.max = a.at("max").get<std::vector<double>>();
  }
  read_opt(j, "n_samples", s.n_samples);
  read_opt(j, "top_k", s.top_k);
  read_opt(j, "d_far", s.d_far);
  if (j.contains("regime")) {
    const auto r = j.at("regime").get<std::string>();
    if (r == "pathloss") {
      s.regime = Regime::pathloss;
    } else if (r == "raytrace") {
      s.regime = Regime::raytrace;
    } else {
      throw std::invalid_argument("regime must be 'pathloss' or 'raytrace'");
    }
  }
  if (j.contains("buildings")) s.buildings = read_buildings(j.at("buildings"));
  return s;
}

EstimatorSpec read_estimator(const json& j) {
  reject_unknown(j,
                 {"kind", "name", "beta", "epochs", "lr", "lr_final_ratio", "nn_lr", "nn_warmup_epochs",
                  "zero_output_init", "theta_unit_m", "p0_unit_db", "n_starts", "hidden", "theta_init", "p0_init_dbw",
                  "grid_points", "seed"},
                 "estimator");
  EstimatorSpec e;
  e.kind = parse_estimator_kind(j.at("kind").get<std::string>());
  read_opt(j, "name", e.name);
  read_opt(j, "beta", e.beta);
  read_opt(j, "epochs", e.epochs);
  read_opt(j, "lr", e.lr);
  read_opt(j, "lr_final_ratio", e.lr_final_ratio);
  if (j.contains("nn_lr")) e.nn_lr = j.at("nn_lr").get<double>();
  read_opt(j, "zero_output_init", e.zero_output_init);
  if (j.contains("theta_unit_m")) e.theta_unit_m = j.at("theta_unit_m").get<double>();
  read_opt(j, "p0_unit_db", e.p0_unit_db);
  read_opt(j, "nn_warmup_epochs", e.nn_warmup_epochs);
  read_opt(j, "n_starts", e.n_starts);
  read_opt(j, "hidden", e.hidden);
  if (j.contains("theta_init")) e.theta_init = read_position(j.at("theta_init"));
  if (j.contains("p0_init_dbw")) e.p0_init_dbw = j.at("p0_init_dbw").get<double>();
  read_opt(j, "grid_points", e.grid_points);
  read_opt(j, "seed", e.seed);
  e.validate();
  return e;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"schema_version", "scenario", "estimators", "sweep"}, "config");
  const int version = j.value("schema_version", 0);
  if (version != kConfigSchemaVersion) {
    throw std::invalid_argument("unsupported config schema_version " + std::to_string(version));
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("scenario")) cfg.scenario = read_scenario(j.at("scenario"));
    if (j.contains("estimators")) {
      for (const auto& e : j.at("estimators")) cfg.estimators.push_back(read_estimator(e));
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      reject_unknown(s, {"inr_grid_db", "n_mc", "master_seed", "output_dir", "workers", "record_timing"},
                     "sweep");
      read_opt(s, "inr_grid_db", cfg.inr_grid_db);
      read_opt(s, "n_mc", cfg.n_mc);
      read_opt(s, "master_seed", cfg.master_seed);
      if (s.contains("output_dir")) cfg.output_dir = s.at("output_dir").get<std::string>();
      read_opt(s, "workers", cfg.workers);
      read_opt(s, "record_timing", cfg.record_timing);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string dump_experiment_config(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  const auto& s = cfg.scenario;
  auto& js = j["scenario"];
  js["jammer"] = {{"position", std::vector<double>(s.jammer.theta.coords().begin(),
                                                   s.jammer.theta.coords().end())},
                  {"p0_dbw", s.jammer.p0_dbw},
                  {"gamma", s.jammer.gamma}};
  js["area"] = {{"min", s.area.min}, {"max", s.area.max}};
  js["n_samples"] = s.n_samples;
  js["top_k"] = s.top_k;
  js["d_far"] = s.d_far;
  js["regime"] = s.regime == Regime::pathloss ? "pathloss" : "raytrace";
  if (s.regime == Regime::raytrace) {
    auto& jb = js["buildings"];
    jb["reflection_loss_db"] = s.buildings.reflection_loss_db;
    jb["max_reflections"] = s.buildings.max_reflections;
    jb["floor_dbw"] = s.buildings.floor_dbw;
    jb["polygons"] = nlohmann::ordered_json::array();
    for (const auto& p : s.buildings.polygons) {
      auto poly = nlohmann::ordered_json::array();
      for (const auto& v : p.vertices) poly.push_back({v.x, v.y});
      jb["polygons"].push_back(poly);
    }
  }
  j["estimators"] = nlohmann::ordered_json::array();
  for (const auto& e : cfg.estimators) {
    nlohmann::ordered_json je;
    je["kind"] = std::string(to_string(e.kind));
    je["name"] = e.label();
    je["beta"] = e.beta;
    je["epochs"] = e.epochs;
    je["lr"] = e.lr;
    je["lr_final_ratio"] = e.lr_final_ratio;
    if (e.nn_lr) je["nn_lr"] = *e.nn_lr;
    je["nn_warmup_epochs"] = e.nn_warmup_epochs;
    je["zero_output_init"] = e.zero_output_init;
    if (e.theta_unit_m) je["theta_unit_m"] = *e.theta_unit_m;
    je["p0_unit_db"] = e.p0_unit_db;
    je["n_starts"] = e.n_starts;
    je["hidden"] = e.hidden;
    if (e.theta_init) {
      je["theta_init"] = std::vector<double>(e.theta_init->coords().begin(), e.theta_init->coords().end());
    }
    if (e.p0_init_dbw) je["p0_init_dbw"] = *e.p0_init_dbw;
    je["grid_points"] = e.grid_points;
    je["seed"] = e.seed;
    j["estimators"].push_back(je);
  }
  j["sweep"] = {{"inr_grid_db", cfg.inr_grid_db},
                {"n_mc", cfg.n_mc},
                {"master_seed", cfg.master_seed},
                {"output_dir", cfg.output_dir.string()},
                {"workers", cfg.workers},
                {"record_timing", cfg.record_timing}};
  return j.dump(2);
}

}  // namespace jamfield
