// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "stpc/control.hpp"
#include "stpc/filter.hpp"
#include "stpc/plant.hpp"

namespace stpc {

// Dataset files carry full double precision (17 significant digits) so a
// rerun with the same seed reproduces them byte for byte.
void write_dataset(const std::string& path, const Trajectory& traj);
Trajectory read_dataset(const std::string& path);

void write_sample_log(const std::string& path, const std::vector<SampleStep>& log);
void write_run_log(const std::string& path, const std::vector<LogRow>& log);
std::vector<LogRow> read_run_log(const std::string& path, std::size_t m, std::size_t p);

void write_run_summary(const std::string& path, const RunResult& res);

}  // namespace stpc
