// SPDX-License-Identifier: Apache-2.0
#pragma once
#include <vector>

#include "stpc/linalg.hpp"
#include "stpc/plant.hpp"

namespace stpc {

// Block Hankel matrix of depth L built from a d-dimensional sample sequence:
// column j stacks samples j .. j+L-1.
struct HankelMatrix {
  Mat entries;  // (d*L) x (N0-L+1)
  std::size_t block_dim = 0, depth = 0;
};

HankelMatrix build_hankel(const std::vector<Vec>& samples, std::size_t L);

// Persistent excitation of order L: rank(H_L(inputs)) == m*L, rank decided
// by singular values above rank_tol * sigma_max.
bool pe_order_check(const std::vector<Vec>& inputs, std::size_t L, double rank_tol = 1e-9);

// Offline dataset plus its stacked [H_L(u); H_L(y)] representation, where
// L = N + T_ini. `stacked` keeps the raw concatenation. Data recorded from
// an unstable plant spans many decades, which buries the rank structure and
// poisons any least-squares/QP done on the raw coefficients, so the archive
// also carries a column-equilibrated copy (unit column norms). Scaling
// columns only reparameterizes the coefficient vector: the column space,
// and hence the set of representable trajectories, is untouched.
struct DataArchive {
  Trajectory dataset;
  std::size_t L = 0, T_ini = 0, N = 0;
  std::size_t m = 0, p = 0;
  Mat stacked;      // (m+p)L x (N0-L+1), raw
  Mat stacked_eq;   // same shape, unit-norm columns
  Vec col_scale;    // stacked_eq[:,j] = stacked[:,j] * col_scale[j]
  Mat span_basis;   // orthonormal basis of the stacked column space ((m+p)L x rank)
  std::size_t rank = 0;
  std::size_t cols() const { return stacked.cols; }
};

DataArchive make_archive(const Trajectory& dataset, std::size_t T_ini, std::size_t N,
                         double rank_tol = 1e-9);

// Distance of a candidate stacked (u window, y window) vector from the span
// of the archive columns: min_a ||stacked*a - candidate||_2. Zero exactly
// when the candidate is a trajectory of the data-generating system.
double span_residual(const DataArchive& archive, const Vec& candidate);

// Last T_ini inputs and outputs before time t, flattened inputs-first:
// [u_{t-T_ini},...,u_{t-1}, y_{t-T_ini},...,y_{t-1}].
struct ExtendedState {
  Vec flat;
  std::size_t m = 0, p = 0, T_ini = 0;
  std::size_t dim() const { return flat.size(); }
};

ExtendedState extended_state(const Trajectory& history, std::size_t t, std::size_t T_ini);

// All sliding-window extended states xi_0 .. xi_N of a trajectory of length
// N + T_ini; xi_k covers sample indices [k, k+T_ini).
std::vector<ExtendedState> extended_trajectory(const Trajectory& traj, std::size_t T_ini);

}  // namespace stpc
