// SPDX-License-Identifier: Apache-2.0
#include "stpc/reach.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "stpc/rng.hpp"

namespace stpc {

namespace {

void check_config(const ReachConfig& cfg) {
  if (cfg.n_star < 1) throw std::invalid_argument("reach: n_star must be at least 1");
  if (cfg.N_i < 1) throw std::invalid_argument("reach: N_i must be at least 1");
  if (cfg.N <= 2 * cfg.T_ini)
    throw std::invalid_argument("reach: window must satisfy N > 2*T_ini (two windows must fit)");
}

}  // namespace

NestedFamily build_family(const DataArchive& archive, const PlantSpec& plant,
                          const ConstraintBoxes& boxes, const ReachConfig& cfg,
                          std::vector<LevelBuildInfo>* info, std::ostream* log) {
  check_config(cfg);
  if (archive.N != cfg.N || archive.T_ini != cfg.T_ini)
    throw std::invalid_argument("reach: archive window does not match the configuration");

  const std::size_t d = (archive.m + archive.p) * archive.T_ini;
  NestedFamily fam;
  fam.T_ini = archive.T_ini;
  fam.m = archive.m;
  fam.p = archive.p;
  fam.N = archive.N;
  fam.boxes = boxes;
  VRepSet seed_set;
  seed_set.vertices.push_back(Vec(d, 0.0));
  fam.levels.push_back(seed_set);

  for (std::size_t l = 1; l <= cfg.n_star; ++l) {
    const std::uint64_t level_seed = splitmix64(cfg.seed + l);
    SampleRun run = sample_backups(archive, plant, boxes, fam.levels[l - 1], cfg.N_i, level_seed);

    LevelBuildInfo li;
    li.level = l;
    li.filter_failures = run.failures;
    li.restarts = run.restarts;

    // Accumulate extended states, pruning periodically so the working set
    // stays small. The previous level's vertices seed the list, which keeps
    // the family nested by construction.
    VRepSet working = fam.levels[l - 1];
    std::size_t since_prune = 0;
    auto prune_now = [&] {
      if (cfg.prune) working = prune_redundant(working);
      since_prune = 0;
    };
    for (const BackupTrajectory& bt : run.backups) {
      for (const ExtendedState& xi : bt.extended_states) {
        // Clip solver dust so stored vertices sit inside the boxes exactly.
        Vec v = xi.flat;
        for (std::size_t k = 0; k < archive.T_ini; ++k) {
          for (std::size_t c = 0; c < archive.m; ++c) {
            double& x = v[k * archive.m + c];
            x = std::clamp(x, boxes.u_lo[c], boxes.u_hi[c]);
          }
          for (std::size_t c = 0; c < archive.p; ++c) {
            double& x = v[archive.m * archive.T_ini + k * archive.p + c];
            x = std::clamp(x, boxes.y_lo[c], boxes.y_hi[c]);
          }
        }
        working.vertices.push_back(std::move(v));
        ++li.collected_states;
      }
      if (++since_prune >= cfg.prune_every) prune_now();
    }
    prune_now();

    // Enforce the vertex budget without ever dropping the inherited base:
    // the base alone already certifies nestedness.
    if (working.count() > cfg.vertex_cap) {
      li.cap_hit = true;
      const VRepSet& base = fam.levels[l - 1];
      VRepSet capped;
      capped.vertices = base.vertices;
      for (const Vec& v : working.vertices) {
        if (capped.count() >= cfg.vertex_cap) break;
        capped.vertices.push_back(v);
      }
      working = cfg.prune ? prune_redundant(capped) : capped;
      if (log)
        *log << "level " << l << ": vertex cap " << cfg.vertex_cap
             << " reached, newest states dropped\n";
    }

    li.kept_vertices = working.count();
    if (log)
      *log << "level " << l << ": collected " << li.collected_states << " states, kept "
           << li.kept_vertices << " vertices, " << li.filter_failures << " filter failures, "
           << li.restarts << " restarts\n";
    if (info) info->push_back(li);
    fam.levels.push_back(std::move(working));
  }
  return fam;
}

VerifyReport verify_family(const NestedFamily& family, const DataArchive& archive,
                           std::size_t samples, std::uint64_t seed) {
  VerifyReport rep;
  rep.level_failures.assign(family.size(), 0);
  Rng rng(seed);
  for (std::size_t l = 1; l < family.size(); ++l) {
    const VRepSet& level = family.levels[l];
    const VRepSet& target = family.levels[l - 1];
    for (std::size_t s = 0; s < samples; ++s) {
      const Vec& v = level.vertices[rng.below(level.count())];
      FilterProblem prob;
      prob.archive = &archive;
      prob.target = &target;
      prob.u_learning.assign(archive.m, 0.0);
      prob.boxes = family.boxes;
      prob.xi_now.m = archive.m;
      prob.xi_now.p = archive.p;
      prob.xi_now.T_ini = archive.T_ini;
      prob.xi_now.flat = v;
      ++rep.attempts;
      FilterOutcome fo = filter_step(prob);
      if (!fo.ok) {
        ++rep.level_failures[l];
        continue;
      }
      // Audit that the planned window really is a recorded-span trajectory.
      Vec window;
      for (const Vec& u : fo.backup.inputs) window.insert(window.end(), u.begin(), u.end());
      for (const Vec& y : fo.backup.outputs) window.insert(window.end(), y.begin(), y.end());
      const double resid = span_residual(archive, window);
      rep.max_span_residual = std::max(rep.max_span_residual, resid);
      if (resid > 1e-7) {
        ++rep.level_failures[l];
        continue;
      }
      ++rep.passes;
    }
  }
  return rep;
}

void save_family(const NestedFamily& family, const std::string& path) {
  nlohmann::json j;
  j["version"] = kFamilyFormatVersion;
  j["T_ini"] = family.T_ini;
  j["m"] = family.m;
  j["p"] = family.p;
  j["N"] = family.N;
  j["u_box"] = {{"lo", family.boxes.u_lo}, {"hi", family.boxes.u_hi}};
  j["y_box"] = {{"lo", family.boxes.y_lo}, {"hi", family.boxes.y_hi}};
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t l = 0; l < family.size(); ++l) {
    nlohmann::json lvl;
    lvl["index"] = l;
    lvl["vertices"] = family.levels[l].vertices;
    levels.push_back(std::move(lvl));
  }
  j["levels"] = std::move(levels);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("family save: cannot open " + path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("family save: write failed for " + path);
}

NestedFamily load_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("family load: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("family load: malformed JSON in " + path + ": " + e.what());
  }
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw std::runtime_error("family load: missing format version");
  const int ver = j["version"].get<int>();
  if (ver != kFamilyFormatVersion)
    throw std::runtime_error("family load: file format version " + std::to_string(ver) +
                             " unsupported (this build reads version " +
                             std::to_string(kFamilyFormatVersion) + ")");
  NestedFamily fam;
  try {
    fam.T_ini = j.at("T_ini").get<std::size_t>();
    fam.m = j.at("m").get<std::size_t>();
    fam.p = j.at("p").get<std::size_t>();
    fam.N = j.at("N").get<std::size_t>();
    fam.boxes.u_lo = j.at("u_box").at("lo").get<Vec>();
    fam.boxes.u_hi = j.at("u_box").at("hi").get<Vec>();
    fam.boxes.y_lo = j.at("y_box").at("lo").get<Vec>();
    fam.boxes.y_hi = j.at("y_box").at("hi").get<Vec>();
    const auto& levels = j.at("levels");
    fam.levels.resize(levels.size());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (levels[l].at("index").get<std::size_t>() != l)
        throw std::runtime_error("level indices out of order");
      fam.levels[l].vertices = levels[l].at("vertices").get<std::vector<Vec>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("family load: malformed family in " + path + ": " + e.what());
  }

  // Re-validate everything a consumer relies on.
  if (fam.T_ini < 1 || fam.m < 1 || fam.p < 1)
    throw std::runtime_error("family load: invalid dimensions");
  if (fam.boxes.u_lo.size() != fam.m || fam.boxes.u_hi.size() != fam.m ||
      fam.boxes.y_lo.size() != fam.p || fam.boxes.y_hi.size() != fam.p)
    throw std::runtime_error("family load: constraint box dimensions do not match m, p");
  const std::size_t d = (fam.m + fam.p) * fam.T_ini;
  if (fam.levels.empty()) throw std::runtime_error("family load: no levels");
  constexpr double kBoxTol = 1e-9;
  for (std::size_t l = 0; l < fam.size(); ++l) {
    const VRepSet& lv = fam.levels[l];
    if (lv.empty()) throw std::runtime_error("family load: empty level " + std::to_string(l));
    for (const Vec& v : lv.vertices) {
      if (v.size() != d) throw std::runtime_error("family load: vertex dimension mismatch");
      for (std::size_t k = 0; k < fam.T_ini; ++k) {
        for (std::size_t c = 0; c < fam.m; ++c) {
          const double x = v[k * fam.m + c];
          if (x < fam.boxes.u_lo[c] - kBoxTol || x > fam.boxes.u_hi[c] + kBoxTol)
            throw std::runtime_error("family load: vertex violates the input box at level " +
                                     std::to_string(l));
        }
        for (std::size_t c = 0; c < fam.p; ++c) {
          const double x = v[fam.m * fam.T_ini + k * fam.p + c];
          if (x < fam.boxes.y_lo[c] - kBoxTol || x > fam.boxes.y_hi[c] + kBoxTol)
            throw std::runtime_error("family load: vertex violates the output box at level " +
                                     std::to_string(l));
        }
      }
    }
  }
  if (auto bad = nestedness_violation(fam); bad.has_value())
    throw std::runtime_error("family load: nestedness broken at level " + std::to_string(*bad));
  return fam;
}

}  // namespace stpc
