#pragma once

#include <stdexcept>
#include <tuple>
#include <vector>

#include "micpdag/model.hpp"

namespace micpdag {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (i, k, j) with i < j for every collider i -> k <- j whose ends are non-adjacent.
std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> v_structures(const Dag& dag);

/// Skeleton plus v-structure orientations, closed under the four Meek rules.
Cpdag dag_to_cpdag(const Dag& dag);

/// Same skeleton and same v-structures.
bool mec_equal(const Dag& a, const Dag& b);

/// Number of differing entries of the two adjacency matrices.
std::size_t d_cpdag(const Cpdag& a, const Cpdag& b);

/// d / true edge count (d itself when the truth has no edges).
double scaled_d_cpdag(std::size_t d, std::size_t true_edges);

struct SkeletonMetrics {
  std::size_t shd = 0;
  double tpr = 1.0;
  double fpr = 0.0;
};

/// Undirected-skeleton comparison. An empty true skeleton gives tpr = 1, a
/// complete one fpr = 0.
SkeletonMetrics skeleton_metrics(const Dag& truth, const Dag& est);

}  // namespace micpdag
