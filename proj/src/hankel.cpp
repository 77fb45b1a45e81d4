// SPDX-License-Identifier: Apache-2.0
#include "stpc/hankel.hpp"

#include <cmath>
#include <stdexcept>

#include "stpc/kernels.hpp"

namespace stpc {

HankelMatrix build_hankel(const std::vector<Vec>& samples, std::size_t L) {
  if (L == 0) throw std::invalid_argument("build_hankel: depth must be positive");
  if (samples.size() < L) throw std::invalid_argument("build_hankel: fewer samples than depth");
  const std::size_t d = samples[0].size();
  const std::size_t cols = samples.size() - L + 1;
  HankelMatrix h;
  h.block_dim = d;
  h.depth = L;
  h.entries = Mat(d * L, cols);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const Vec& s = samples[i + j];
      for (std::size_t c = 0; c < d; ++c) h.entries(i * d + c, j) = s[c];
    }
  return h;
}

bool pe_order_check(const std::vector<Vec>& inputs, std::size_t L, double rank_tol) {
  if (inputs.size() < L) return false;
  HankelMatrix h = build_hankel(inputs, L);
  Svd s = svd_jacobi(h.entries);
  return numerical_rank(s.sigma, rank_tol) == h.block_dim * L;
}

DataArchive make_archive(const Trajectory& dataset, std::size_t T_ini, std::size_t N, double rank_tol) {
  if (T_ini == 0) throw std::invalid_argument("make_archive: T_ini must be at least 1");
  if (!(N > 2 * T_ini))
    throw std::invalid_argument("make_archive: prediction window must satisfy N > 2*T_ini");
  if (dataset.inputs.size() != dataset.outputs.size())
    throw std::invalid_argument("make_archive: dataset inputs/outputs length mismatch");
  const std::size_t L = N + T_ini;
  const std::size_t m = dataset.m(), p = dataset.p();
  const std::size_t N0 = dataset.length();
  if (N0 + 1 < (m + p + 1) * L)
    throw std::invalid_argument("make_archive: dataset too short, need N0 >= (m+p+1)*L - 1");
  if (!pe_order_check(dataset.inputs, L, rank_tol))
    throw std::runtime_error("make_archive: persistent excitation failed at order L");

  DataArchive a;
  a.dataset = dataset;
  a.L = L;
  a.T_ini = T_ini;
  a.N = N;
  a.m = m;
  a.p = p;

  HankelMatrix hu = build_hankel(dataset.inputs, L);
  HankelMatrix hy = build_hankel(dataset.outputs, L);
  const std::size_t cols = hu.entries.cols;
  a.stacked = Mat(m * L + p * L, cols);
  for (std::size_t i = 0; i < m * L; ++i)
    for (std::size_t j = 0; j < cols; ++j) a.stacked(i, j) = hu.entries(i, j);
  for (std::size_t i = 0; i < p * L; ++i)
    for (std::size_t j = 0; j < cols; ++j) a.stacked(m * L + i, j) = hy.entries(i, j);

  a.stacked_eq = a.stacked;
  a.col_scale.assign(cols, 1.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.stacked.rows; ++i) s += a.stacked(i, j) * a.stacked(i, j);
    s = std::sqrt(s);
    if (s > 0.0) {
      a.col_scale[j] = 1.0 / s;
      for (std::size_t i = 0; i < a.stacked.rows; ++i) a.stacked_eq(i, j) *= a.col_scale[j];
    }
  }

  Svd s = svd_jacobi(a.stacked_eq, /*want_basis=*/true);
  a.rank = numerical_rank(s.sigma, rank_tol);
  if (a.rank <= m * L)
    throw std::runtime_error(
        "make_archive: stacked Hankel rank adds no output information (rank <= m*L); data not informative");
  a.span_basis = Mat(a.stacked.rows, a.rank);
  for (std::size_t j = 0; j < a.rank; ++j)
    for (std::size_t i = 0; i < a.stacked.rows; ++i) a.span_basis(i, j) = s.col_basis(i, j);
  return a;
}

double span_residual(const DataArchive& archive, const Vec& candidate) {
  if (candidate.size() != archive.stacked.rows)
    throw std::invalid_argument("span_residual: candidate length must be (m+p)*L");
  // Orthogonal projection onto the column space: residual = ||c - Q Q^T c||.
  Vec qtc = matvec_t(archive.span_basis, candidate);
  Vec proj = matvec(archive.span_basis, qtc);
  double r = 0.0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const double d = candidate[i] - proj[i];
    r += d * d;
  }
  return std::sqrt(r);
}

ExtendedState extended_state(const Trajectory& history, std::size_t t, std::size_t T_ini) {
  if (t < T_ini) throw std::invalid_argument("extended_state: fewer than T_ini samples before t");
  if (history.length() < t) throw std::invalid_argument("extended_state: t beyond history");
  const std::size_t m = history.m(), p = history.p();
  ExtendedState xi;
  xi.m = m;
  xi.p = p;
  xi.T_ini = T_ini;
  xi.flat.reserve((m + p) * T_ini);
  for (std::size_t k = t - T_ini; k < t; ++k)
    xi.flat.insert(xi.flat.end(), history.inputs[k].begin(), history.inputs[k].end());
  for (std::size_t k = t - T_ini; k < t; ++k)
    xi.flat.insert(xi.flat.end(), history.outputs[k].begin(), history.outputs[k].end());
  return xi;
}

std::vector<ExtendedState> extended_trajectory(const Trajectory& traj, std::size_t T_ini) {
  if (traj.length() < T_ini + 1)
    throw std::invalid_argument("extended_trajectory: trajectory shorter than T_ini + 1");
  const std::size_t N = traj.length() - T_ini;
  std::vector<ExtendedState> out;
  out.reserve(N + 1);
  for (std::size_t k = 0; k <= N; ++k) out.push_back(extended_state(traj, k + T_ini, T_ini));
  return out;
}

}  // namespace stpc
