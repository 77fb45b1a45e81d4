// SPDX-License-Identifier: Apache-2.0
#include "stpc/plant.hpp"

#include <stdexcept>

#include "stpc/rng.hpp"

namespace stpc {

void PlantSpec::validate() const {
  if (A.rows != A.cols) throw std::invalid_argument("plant: A must be square");
  if (B.rows != A.rows) throw std::invalid_argument("plant: B row count must match A");
  if (C.cols != A.cols) throw std::invalid_argument("plant: C column count must match A");
  if (D.rows != C.rows || D.cols != B.cols) throw std::invalid_argument("plant: D must be p x m");
}

void ConstraintBoxes::validate() const {
  if (u_lo.size() != u_hi.size() || y_lo.size() != y_hi.size())
    throw std::invalid_argument("boxes: bound vectors must pair up");
  for (std::size_t i = 0; i < u_lo.size(); ++i)
    if (!(u_lo[i] < 0.0 && 0.0 < u_hi[i]))
      throw std::invalid_argument("boxes: input box must strictly contain the origin (admissible equilibrium)");
  for (std::size_t i = 0; i < y_lo.size(); ++i)
    if (!(y_lo[i] < 0.0 && 0.0 < y_hi[i]))
      throw std::invalid_argument("boxes: output box must strictly contain the origin (admissible equilibrium)");
}

bool ConstraintBoxes::u_inside(const Vec& u, double tol) const {
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u[i] < u_lo[i] - tol || u[i] > u_hi[i] + tol) return false;
  return true;
}

bool ConstraintBoxes::y_inside(const Vec& y, double tol) const {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] < y_lo[i] - tol || y[i] > y_hi[i] + tol) return false;
  return true;
}

Trajectory simulate(const PlantSpec& spec, const Vec& x0, const std::vector<Vec>& inputs) {
  spec.validate();
  if (x0.size() != spec.n()) throw std::invalid_argument("simulate: x0 dimension mismatch");
  Trajectory traj;
  traj.inputs = inputs;
  traj.outputs.reserve(inputs.size());
  Vec x = x0;
  for (const Vec& u : inputs) {
    if (u.size() != spec.m()) throw std::invalid_argument("simulate: input dimension mismatch");
    Vec y = matvec(spec.C, x);
    if (!spec.D.empty()) {
      Vec du = matvec(spec.D, u);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += du[i];
    }
    traj.outputs.push_back(std::move(y));
    Vec xn = matvec(spec.A, x);
    Vec bu = matvec(spec.B, u);
    for (std::size_t i = 0; i < xn.size(); ++i) xn[i] += bu[i];
    x = std::move(xn);
  }
  return traj;
}

std::vector<Vec> generate_excitation(const ConstraintBoxes& boxes, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw std::invalid_argument("generate_excitation: length must be positive");
  Rng rng(seed);
  std::vector<Vec> seq(length);
  const std::size_t m = boxes.u_lo.size();
  for (std::size_t t = 0; t < length; ++t) {
    Vec u(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = rng.uniform(boxes.u_lo[i], boxes.u_hi[i]);
    seq[t] = std::move(u);
  }
  return seq;
}

Trajectory collect_dataset(const PlantSpec& spec, const Vec& x0, const std::vector<Vec>& excitation) {
  return simulate(spec, x0, excitation);
}

Trajectory collect_dataset(const PlantSpec& spec, const ConstraintBoxes& boxes, std::size_t length,
                           std::uint64_t seed) {
  return simulate(spec, Vec(spec.n(), 0.0), generate_excitation(boxes, length, seed));
}

Vec PlantLoop::step(const Vec& u) {
  Vec y = matvec(spec.C, x);
  if (!spec.D.empty()) {
    Vec du = matvec(spec.D, u);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += du[i];
  }
  Vec xn = matvec(spec.A, x);
  Vec bu = matvec(spec.B, u);
  for (std::size_t i = 0; i < xn.size(); ++i) xn[i] += bu[i];
  x = std::move(xn);
  return y;
}

}  // namespace stpc
