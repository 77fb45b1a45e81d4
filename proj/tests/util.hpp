// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stpc/config.hpp"
#include "stpc/hankel.hpp"
#include "stpc/plant.hpp"

// Shared fixture: the unstable second-order SISO benchmark plant and the
// archive built from its standard 200-sample seeded experiment.
namespace testutil {

inline stpc::PlantSpec benchmark_plant() { return stpc::default_experiment().plant; }

inline stpc::ConstraintBoxes benchmark_boxes() { return stpc::default_experiment().boxes; }

inline const stpc::DataArchive& benchmark_archive() {
  static const stpc::DataArchive a = [] {
    const stpc::ExperimentConfig cfg = stpc::default_experiment();
    const stpc::Trajectory data =
        stpc::collect_dataset(cfg.plant, cfg.boxes, cfg.dataset.length, cfg.dataset.seed);
    return stpc::make_archive(data, cfg.T_ini, cfg.N());
  }();
  return a;
}

}  // namespace testutil
