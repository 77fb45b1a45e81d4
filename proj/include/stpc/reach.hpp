// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stpc/filter.hpp"
#include "stpc/geometry.hpp"
#include "stpc/hankel.hpp"
#include "stpc/plant.hpp"

namespace stpc {

struct ReachConfig {
  std::size_t n_star = 5;  // number of expansion levels
  std::size_t N_i = 800;   // filter steps consumed per level
  std::size_t N = 6;
  std::size_t T_ini = 2;
  std::uint64_t seed = 1;
  bool prune = true;
  std::size_t prune_every = 100;   // backups between redundancy prunes
  std::size_t vertex_cap = 2000;   // per-level cap on carried vertices
};

struct LevelBuildInfo {
  std::size_t level = 0;
  std::size_t collected_states = 0;
  std::size_t kept_vertices = 0;
  std::size_t filter_failures = 0;
  std::size_t restarts = 0;
  bool cap_hit = false;
};

// Level 0 is the origin singleton; each further level is the convex hull of
// the previous level and every extended state of every backup trajectory
// sampled against it. Deterministic for fixed inputs; per-level sampling
// seeds derive from cfg.seed.
NestedFamily build_family(const DataArchive& archive, const PlantSpec& plant,
                          const ConstraintBoxes& boxes, const ReachConfig& cfg,
                          std::vector<LevelBuildInfo>* info = nullptr,
                          std::ostream* log = nullptr);

struct VerifyReport {
  std::size_t attempts = 0;
  std::size_t passes = 0;
  std::vector<std::size_t> level_failures;  // indexed by level
  double max_span_residual = 0.0;
  bool all_passed() const { return attempts == passes; }
};

// Spot-check of the defining property: from sampled vertices of each level
// l >= 1, a feasible filtered trajectory must reach level l-1 within N steps.
VerifyReport verify_family(const NestedFamily& family, const DataArchive& archive,
                           std::size_t samples, std::uint64_t seed);

inline constexpr int kFamilyFormatVersion = 1;

// JSON persistence. Loading re-validates dimensions, box membership of every
// vertex, and nestedness, and rejects other format versions by name.
void save_family(const NestedFamily& family, const std::string& path);
NestedFamily load_family(const std::string& path);

}  // namespace stpc
