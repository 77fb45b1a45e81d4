// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "stpc/control.hpp"
#include "stpc/plant.hpp"
#include "stpc/reach.hpp"

namespace stpc {

struct DatasetConfig {
  std::size_t length = 200;
  std::uint64_t seed = 7;
  double amplitude = 1.0;  // excitation box scale in [0, 1]
};

struct ExperimentConfig {
  PlantSpec plant;
  ConstraintBoxes boxes;
  std::size_t T_ini = 2;
  std::size_t N_p = 4;  // planning steps beyond the window; N = T_ini + N_p
  DatasetConfig dataset;
  ReachConfig reach;
  ControllerWeights weights;
  Vec x0;
  RunOptions run;

  std::size_t N() const { return T_ini + N_p; }
  std::size_t L() const { return T_ini + N(); }

  void validate() const;
};

// The benchmark experiment: the unstable second-order SISO plant
// A=[[1,1],[0,2]], B=[0;1], C=[1 0], D=[0] with |u| <= 0.5, |y| <= 4,
// T_ini=2, N_p=4, unit weights, started from x0=[4,0].
ExperimentConfig default_experiment();

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace stpc
