// SPDX-License-Identifier: Apache-2.0
#include "stpc/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace stpc {

namespace {

Mat mat_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::runtime_error("config: " + name + " must be a matrix (array of rows)");
  Mat m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != m.cols)
      throw std::runtime_error("config: ragged rows in " + name);
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat scaled_identity(std::size_t n, double s) {
  Mat m = Mat::identity(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = s;
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  plant.validate();
  boxes.validate();
  if (boxes.u_lo.size() != plant.m() || boxes.y_lo.size() != plant.p())
    throw std::runtime_error("config: constraint boxes must match the plant's m and p");
  if (T_ini < 1) throw std::runtime_error("config: T_ini must be at least 1 (window assumption)");
  if (N() <= 2 * T_ini)
    throw std::runtime_error("config: N = T_ini + N_p must exceed 2*T_ini (two windows must fit)");
  if (dataset.length + 1 < (plant.m() + plant.p() + 1) * L())
    throw std::runtime_error(
        "config: dataset too short for persistent excitation at the required order");
  if (dataset.amplitude < 0.0 || dataset.amplitude > 1.0)
    throw std::runtime_error("config: excitation amplitude must lie in [0, 1]");
  if (x0.size() != plant.n()) throw std::runtime_error("config: x0 dimension mismatch");
  if (weights.Q_y.rows != plant.p() || weights.Q_u.rows != plant.m())
    throw std::runtime_error("config: weight dimensions must be p x p and m x m");
  if (reach.N != N() || reach.T_ini != T_ini)
    throw std::runtime_error("config: reach window settings must mirror the horizon");
  if (reach.n_star < 1) throw std::runtime_error("config: reach levels must be at least 1");
  if (run.eps_conv <= 0) throw std::runtime_error("config: eps_conv must be positive");
}

ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.plant.A = Mat(2, 2);
  cfg.plant.A(0, 0) = 1.0;
  cfg.plant.A(0, 1) = 1.0;
  cfg.plant.A(1, 0) = 0.0;
  cfg.plant.A(1, 1) = 2.0;
  cfg.plant.B = Mat(2, 1);
  cfg.plant.B(1, 0) = 1.0;
  cfg.plant.C = Mat(1, 2);
  cfg.plant.C(0, 0) = 1.0;
  cfg.plant.D = Mat(1, 1);
  cfg.boxes.u_lo = {-0.5};
  cfg.boxes.u_hi = {0.5};
  cfg.boxes.y_lo = {-4.0};
  cfg.boxes.y_hi = {4.0};
  cfg.T_ini = 2;
  cfg.N_p = 4;
  cfg.dataset.length = 200;
  cfg.dataset.seed = 7;
  cfg.reach.n_star = 5;
  cfg.reach.N_i = 800;
  cfg.reach.N = cfg.N();
  cfg.reach.T_ini = cfg.T_ini;
  cfg.reach.seed = 1;
  cfg.reach.prune = true;
  cfg.weights.Q_y = scaled_identity(1, 1.0);
  cfg.weights.Q_u = scaled_identity(1, 1.0);
  cfg.x0 = {4.0, 0.0};
  cfg.run.eps_conv = 1e-2;
  cfg.run.max_steps = 0;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: malformed JSON in " + path + ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    const auto& pl = j.at("plant");
    cfg.plant.A = mat_from_json(pl.at("A"), "plant.A");
    cfg.plant.B = mat_from_json(pl.at("B"), "plant.B");
    cfg.plant.C = mat_from_json(pl.at("C"), "plant.C");
    cfg.plant.D = mat_from_json(pl.at("D"), "plant.D");
    const auto& cs = j.at("constraints");
    cfg.boxes.u_lo = cs.at("u_min").get<Vec>();
    cfg.boxes.u_hi = cs.at("u_max").get<Vec>();
    cfg.boxes.y_lo = cs.at("y_min").get<Vec>();
    cfg.boxes.y_hi = cs.at("y_max").get<Vec>();
    const auto& hz = j.at("horizon");
    cfg.T_ini = hz.at("T_ini").get<std::size_t>();
    cfg.N_p = hz.at("N_p").get<std::size_t>();
    const auto& ds = j.at("dataset");
    cfg.dataset.length = ds.at("length").get<std::size_t>();
    cfg.dataset.seed = ds.at("seed").get<std::uint64_t>();
    cfg.dataset.amplitude = ds.value("amplitude", 1.0);
    const auto& rc = j.at("reach");
    cfg.reach.n_star = rc.at("levels").get<std::size_t>();
    cfg.reach.N_i = rc.at("steps_per_level").get<std::size_t>();
    cfg.reach.seed = rc.at("seed").get<std::uint64_t>();
    cfg.reach.prune = rc.value("prune", true);
    cfg.reach.prune_every = rc.value("prune_every", std::size_t{100});
    cfg.reach.vertex_cap = rc.value("vertex_cap", std::size_t{2000});
    cfg.reach.N = cfg.N();
    cfg.reach.T_ini = cfg.T_ini;
    const auto& wt = j.at("weights");
    cfg.weights.Q_y = scaled_identity(cfg.plant.p(), wt.at("q_y").get<double>());
    cfg.weights.Q_u = scaled_identity(cfg.plant.m(), wt.at("q_u").get<double>());
    cfg.x0 = j.at("x0").get<Vec>();
    if (j.contains("run")) {
      cfg.run.eps_conv = j["run"].value("eps_conv", 1e-2);
      cfg.run.max_steps = j["run"].value("max_steps", 0L);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: missing or malformed field in " + path + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  nlohmann::json j;
  j["plant"] = {{"A", mat_to_json(cfg.plant.A)},
                {"B", mat_to_json(cfg.plant.B)},
                {"C", mat_to_json(cfg.plant.C)},
                {"D", mat_to_json(cfg.plant.D)}};
  j["constraints"] = {{"u_min", cfg.boxes.u_lo},
                      {"u_max", cfg.boxes.u_hi},
                      {"y_min", cfg.boxes.y_lo},
                      {"y_max", cfg.boxes.y_hi}};
  j["horizon"] = {{"T_ini", cfg.T_ini}, {"N_p", cfg.N_p}};
  j["dataset"] = {{"length", cfg.dataset.length},
                  {"seed", cfg.dataset.seed},
                  {"amplitude", cfg.dataset.amplitude}};
  j["reach"] = {{"levels", cfg.reach.n_star},
                {"steps_per_level", cfg.reach.N_i},
                {"seed", cfg.reach.seed},
                {"prune", cfg.reach.prune},
                {"prune_every", cfg.reach.prune_every},
                {"vertex_cap", cfg.reach.vertex_cap}};
  j["weights"] = {{"q_y", cfg.weights.Q_y.empty() ? 1.0 : cfg.weights.Q_y(0, 0)},
                  {"q_u", cfg.weights.Q_u.empty() ? 1.0 : cfg.weights.Q_u(0, 0)}};
  j["x0"] = cfg.x0;
  j["run"] = {{"eps_conv", cfg.run.eps_conv}, {"max_steps", cfg.run.max_steps}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
}

}  // namespace stpc
