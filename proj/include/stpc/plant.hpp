// SPDX-License-Identifier: Apache-2.0
#pragma once
#include <cstdint>
#include <vector>

#include "stpc/linalg.hpp"

namespace stpc {

// Discrete-time LTI plant x+ = A x + B u, y = C x + D u. Ground truth used
// to generate datasets and close the loop; controller code never reads the
// matrices.
struct PlantSpec {
  Mat A, B, C, D;
  std::size_t n() const { return A.rows; }
  std::size_t m() const { return B.cols; }
  std::size_t p() const { return C.rows; }
  void validate() const;  // throws std::invalid_argument on inconsistent dims
};

// Axis-aligned input/output constraint boxes; the origin must lie strictly
// inside both (the equilibrium has to be admissible).
struct ConstraintBoxes {
  Vec u_lo, u_hi, y_lo, y_hi;
  void validate() const;
  bool u_inside(const Vec& u, double tol = 0.0) const;
  bool y_inside(const Vec& y, double tol = 0.0) const;
};

struct Trajectory {
  std::vector<Vec> inputs, outputs;
  long start_index = 0;
  std::size_t length() const { return inputs.size(); }
  std::size_t m() const { return inputs.empty() ? 0 : inputs[0].size(); }
  std::size_t p() const { return outputs.empty() ? 0 : outputs[0].size(); }
};

Trajectory simulate(const PlantSpec& spec, const Vec& x0, const std::vector<Vec>& inputs);

std::vector<Vec> generate_excitation(const ConstraintBoxes& boxes, std::size_t length, std::uint64_t seed);

// The single open-loop experiment producing the offline dataset.
Trajectory collect_dataset(const PlantSpec& spec, const Vec& x0, const std::vector<Vec>& excitation);

// Convenience form: uniform excitation over the input box from a resting
// plant.
Trajectory collect_dataset(const PlantSpec& spec, const ConstraintBoxes& boxes, std::size_t length,
                           std::uint64_t seed);

// Stateful wrapper for closed-loop use.
struct PlantLoop {
  PlantSpec spec;
  Vec x;
  Vec step(const Vec& u);  // returns y at the current state, then advances x
};

}  // namespace stpc
