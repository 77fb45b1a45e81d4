// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "stpc/linalg.hpp"
#include "stpc/plant.hpp"

namespace stpc {

// Convex polytope stored by its vertices (one vertex per entry, all of equal
// dimension). The convex hull of the vertex list is the set itself; the list
// is not required to be irredundant unless it came out of prune_redundant().
struct VRepSet {
  std::vector<Vec> vertices;

  std::size_t dim() const { return vertices.empty() ? 0 : vertices.front().size(); }
  std::size_t count() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
};

struct MembershipWitness {
  bool member = false;
  double residual = 0.0;  // distance proxy: optimal infinity-norm mismatch
  Vec lambda;             // convex weights over the vertex list when member
};

// Curvature placed on convex-combination weight blocks inside QPs. Points in
// the hull interior have many vertex representations; a flat optimal face in
// those weights makes first-order solvers crawl, so programs that embed a
// "window = V lambda" block buy strict convexity there for an objective bias
// of at most this value per block (sum lambda = 1 bounds ||lambda||^2 by 1).
inline constexpr double kLamCurv = 1e-6;

// Decides whether p lies in conv(vertices) by solving
//   min s  s.t.  -s <= V'lambda - p <= s,  sum lambda = 1,  lambda >= 0.
// Membership holds when the optimal mismatch is at or below tol. A solver
// breakdown counts as non-membership (the query is a safety gate).
MembershipWitness membership_witness(const VRepSet& set, const Vec& p, double tol = 1e-7);
bool membership(const VRepSet& set, const Vec& p, double tol = 1e-7);

// Removes vertices that are convex combinations of the others (sequential
// greedy pass; exact duplicates are dropped first). The result spans the
// same hull.
VRepSet prune_redundant(const VRepSet& set, double tol = 1e-9);

// Vertex list of conv(a ∪ b) — concatenation followed by a prune.
VRepSet hull_union(const VRepSet& a, const VRepSet& b, double tol = 1e-9);

// Axis-aligned bounding box of the vertex list.
void bounding_box(const VRepSet& set, Vec& lo, Vec& hi);

// Ordered family of sets, innermost first; level 0 is the seed set and each
// level must contain every lower one. Carries enough metadata to validate a
// persisted family against the experiment that will consume it.
struct NestedFamily {
  std::vector<VRepSet> levels;
  std::size_t T_ini = 0, m = 0, p = 0, N = 0;
  ConstraintBoxes boxes;

  std::size_t size() const { return levels.size(); }
  bool empty() const { return levels.empty(); }

  // Largest level index whose set contains p, scanning from the outermost
  // level inward would be wasteful: nestedness means membership is monotone,
  // so the smallest containing level is found by scanning upward.
  std::optional<std::size_t> smallest_level(const Vec& p, double tol = 1e-7) const;
};

// Checks that every vertex of levels[k-1] lies in levels[k] (within tol).
// Returns the first violating level, or nullopt when the family is nested.
std::optional<std::size_t> nestedness_violation(const NestedFamily& f, double tol = 1e-7);

// Projects the vertex list onto two coordinates and returns the convex hull
// of the projected points in counter-clockwise order (monotone chain).
std::vector<std::array<double, 2>> project_hull_2d(const VRepSet& set, std::size_t i,
                                                   std::size_t j);

}  // namespace stpc
