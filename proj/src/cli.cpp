// SPDX-License-Identifier: Apache-2.0
#include "stpc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "stpc/config.hpp"
#include "stpc/csvio.hpp"
#include "stpc/reach.hpp"

namespace stpc {

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

DataArchive archive_from(const ExperimentConfig& cfg, const std::string& data_path) {
  Trajectory traj = read_dataset(data_path);
  if (traj.m() != cfg.plant.m() || traj.p() != cfg.plant.p())
    throw std::runtime_error("dataset channel count does not match the configured plant");
  return make_archive(traj, cfg.T_ini, cfg.N());
}

int cmd_collect(const ExperimentConfig& cfg, const std::string& out_path) {
  ConstraintBoxes ebox = cfg.boxes;
  for (auto& v : ebox.u_lo) v *= cfg.dataset.amplitude;
  for (auto& v : ebox.u_hi) v *= cfg.dataset.amplitude;
  Trajectory traj = collect_dataset(cfg.plant, ebox, cfg.dataset.length, cfg.dataset.seed);
  if (!pe_order_check(traj.inputs, cfg.L())) {
    std::cerr << "persistent excitation failed at order L=" << cfg.L()
              << "; increase the dataset length or the excitation amplitude\n";
    return kUsageError;
  }
  write_dataset(out_path, traj);
  std::cout << "dataset: " << traj.length() << " samples -> " << out_path
            << "\npersistent excitation at order L=" << cfg.L() << ": ok\n";
  return kOk;
}

int cmd_build_sets(const ExperimentConfig& cfg, const std::string& data_path,
                   const std::string& out_path) {
  DataArchive ar = archive_from(cfg, data_path);
  std::vector<LevelBuildInfo> info;
  NestedFamily fam = build_family(ar, cfg.plant, cfg.boxes, cfg.reach, &info, &std::cout);
  if (auto bad = nestedness_violation(fam); bad.has_value()) {
    std::cerr << "built family is not nested at level " << *bad << "\n";
    return kRuntimeError;
  }
  std::cout << "nestedness: ok (" << fam.size() << " levels)\n";
  save_family(fam, out_path);
  std::cout << "family -> " << out_path << "\n";
  return kOk;
}

int cmd_run(const ExperimentConfig& cfg, const std::string& data_path,
            const std::string& family_path, const std::string& controller,
            const std::string& out_path) {
  DataArchive ar = archive_from(cfg, data_path);
  RunResult res;
  if (controller == "stddpc") {
    NestedFamily fam = load_family(family_path);
    if (fam.T_ini != cfg.T_ini || fam.m != cfg.plant.m() || fam.p != cfg.plant.p() ||
        fam.N != cfg.N())
      throw std::runtime_error("family file does not match the configured horizon or plant");
    res = run_closed_loop(cfg.plant, ar, fam, cfg.x0, cfg.weights, cfg.boxes, cfg.run);
  } else {
    res = run_ddpc_baseline(cfg.plant, ar, cfg.x0, cfg.weights, cfg.boxes, cfg.run);
  }
  write_run_log(out_path, res.log);
  std::string summary_path = out_path;
  const std::string ext = ".csv";
  if (summary_path.size() > ext.size() &&
      summary_path.compare(summary_path.size() - ext.size(), ext.size(), ext) == 0)
    summary_path.resize(summary_path.size() - ext.size());
  summary_path += ".summary.json";
  write_run_summary(summary_path, res);
  std::cout << "controller=" << controller << " converged=" << (res.converged ? "true" : "false")
            << " steps=" << res.steps << " max|u|=" << res.max_abs_u
            << " max|y|=" << res.max_abs_y << "\nlog -> " << out_path << "\nsummary -> "
            << summary_path << "\n";
  if (!res.failure_reason.empty()) std::cout << "reason: " << res.failure_reason << "\n";
  return kOk;
}

int cmd_plotdata(const std::string& family_path, const std::vector<std::string>& log_paths,
                 const std::string& out_dir) {
  NestedFamily fam = load_family(family_path);
  std::filesystem::create_directories(out_dir);
  // Projection coordinates: the two most recent outputs of the window.
  const std::size_t base = fam.m * fam.T_ini;
  const std::size_t idx_y1 = base + (fam.T_ini - 1) * fam.p;          // y at time -1
  const std::size_t idx_y2 = base + (fam.T_ini - 2) * fam.p;          // y at time -2
  if (fam.T_ini < 2) throw std::runtime_error("plotdata: projection needs T_ini >= 2");
  for (std::size_t l = 0; l < fam.size(); ++l) {
    auto poly = project_hull_2d(fam.levels[l], idx_y1, idx_y2);
    const std::string path = out_dir + "/level_" + std::to_string(l) + "_polygon.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("plotdata: cannot open " + path);
    out << "y_prev1,y_prev2\n";
    for (const auto& pt : poly) out << fmt17(pt[0]) << "," << fmt17(pt[1]) << "\n";
  }
  std::cout << "polygons: " << fam.size() << " levels -> " << out_dir << "\n";
  for (const std::string& lp : log_paths) {
    auto rows = read_run_log(lp, fam.m, fam.p);
    std::string stem = std::filesystem::path(lp).stem().string();
    {
      const std::string path = out_dir + "/" + stem + "_timeseries.csv";
      std::ofstream out(path);
      if (!out) throw std::runtime_error("plotdata: cannot open " + path);
      out << "t,u,y,level,w\n";
      for (const auto& r : rows) {
        out << r.t;
        for (double v : r.u) out << "," << fmt17(v);
        for (double v : r.y) out << "," << fmt17(v);
        out << "," << r.level << "," << r.w << "\n";
      }
    }
    {
      // Realized window points on the same projection axes; a point exists
      // once T_ini measurements are available.
      const std::string path = out_dir + "/" + stem + "_points.csv";
      std::ofstream out(path);
      if (!out) throw std::runtime_error("plotdata: cannot open " + path);
      out << "t,y_prev1,y_prev2\n";
      for (std::size_t t = fam.T_ini; t <= rows.size(); ++t) {
        const double y1 = rows[t - 1].y[0];
        const double y2 = rows[t - 2].y[0];
        out << (rows[t - 1].t + 1) << "," << fmt17(y1) << "," << fmt17(y2) << "\n";
      }
    }
    std::cout << "log " << lp << " -> " << stem << "_timeseries.csv, " << stem << "_points.csv\n";
  }
  return kOk;
}

int cmd_check(const ExperimentConfig& cfg, const std::string& data_path,
              const std::string& family_path, std::uint64_t seed) {
  nlohmann::json rep;
  bool pass = true;
  DataArchive ar = archive_from(cfg, data_path);
  rep["archive"] = {{"columns", ar.cols()}, {"rank", ar.rank}};
  try {
    NestedFamily fam = load_family(family_path);
    if (fam.T_ini != cfg.T_ini || fam.m != cfg.plant.m() || fam.p != cfg.plant.p() ||
        fam.N != cfg.N())
      throw std::runtime_error("family metadata does not match the configuration");
    rep["family"] = {{"levels", fam.size()}};
    VerifyReport vr = verify_family(fam, ar, 20, seed);
    rep["verify"] = {{"attempts", vr.attempts},
                     {"passes", vr.passes},
                     {"max_span_residual", vr.max_span_residual}};
    if (!vr.all_passed()) pass = false;
  } catch (const std::exception& e) {
    rep["family_error"] = e.what();
    pass = false;
  }
  rep["pass"] = pass;
  std::cout << rep.dump(1) << "\n";
  return pass ? kOk : kUsageError;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"set-theoretic data-driven predictive control toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, family_path, controller = "stddpc";
  std::vector<std::string> log_paths;
  std::optional<std::uint64_t> seed_override;

  auto* collect = app.add_subcommand("collect", "record an excitation dataset from the plant");
  collect->add_option("--config", config_path, "experiment configuration")->required();
  collect->add_option("--out", out_path, "dataset CSV path")->required();
  collect->add_option("--seed", seed_override, "override the dataset seed");

  auto* build = app.add_subcommand("build-sets", "grow the nested reachable-set family");
  build->add_option("--config", config_path, "experiment configuration")->required();
  build->add_option("--data", data_path, "dataset CSV path")->required();
  build->add_option("--out", out_path, "family JSON path")->required();
  build->add_option("--seed", seed_override, "override the sampling seed");

  auto* run = app.add_subcommand("run", "closed-loop run from the configured x0");
  run->add_option("--config", config_path, "experiment configuration")->required();
  run->add_option("--data", data_path, "dataset CSV path")->required();
  run->add_option("--family", family_path, "family JSON path (stddpc only)");
  run->add_option("--controller", controller, "stddpc | ddpc")
      ->check(CLI::IsMember({"stddpc", "ddpc"}));
  run->add_option("--out", out_path, "run log CSV path")->required();

  auto* plot = app.add_subcommand("plotdata", "emit projection polygons and time series");
  plot->add_option("--family", family_path, "family JSON path")->required();
  plot->add_option("--log", log_paths, "run log CSV path (repeatable)");
  plot->add_option("--out", out_path, "output directory")->required();

  auto* check = app.add_subcommand("check", "verify dataset and family artifacts");
  check->add_option("--config", config_path, "experiment configuration")->required();
  check->add_option("--data", data_path, "dataset CSV path")->required();
  check->add_option("--family", family_path, "family JSON path")->required();
  check->add_option("--seed", seed_override, "verification sampling seed");

  std::vector<const char*> argv;
  argv.push_back("stpc");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsageError;
  }

  try {
    if (plot->parsed()) return cmd_plotdata(family_path, log_paths, out_path);

    ExperimentConfig cfg = load_config(config_path);
    if (collect->parsed()) {
      if (seed_override) cfg.dataset.seed = *seed_override;
      return cmd_collect(cfg, out_path);
    }
    if (build->parsed()) {
      if (seed_override) cfg.reach.seed = *seed_override;
      return cmd_build_sets(cfg, data_path, out_path);
    }
    if (run->parsed()) {
      if (controller == "stddpc" && family_path.empty()) {
        std::cerr << "run: --family is required for the stddpc controller\n";
        return kUsageError;
      }
      return cmd_run(cfg, data_path, family_path, controller, out_path);
    }
    if (check->parsed()) return cmd_check(cfg, data_path, family_path, seed_override.value_or(11));
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    // File and format problems are user input errors; everything else is a
    // runtime failure.
    if (what.find("cannot open") != std::string::npos ||
        what.find("parse error") != std::string::npos ||
        what.find("config:") != std::string::npos ||
        what.find("family load:") != std::string::npos ||
        what.find("does not match") != std::string::npos)
      return kUsageError;
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace stpc
