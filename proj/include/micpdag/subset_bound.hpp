#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "micpdag/formulation.hpp"

namespace micpdag {

/// Node bound that keeps every g binary and replaces acyclicity by cycle rows
///   sum_{(j,k) in C} g_jk <= |C| - 1,
/// one per pair of opposite edges plus longer cycles found on the way, all
/// dualized. Each column then picks its best parent subset:
///
///   L(mu) = sum_k min_P [1 + log c_k(P) + lambda^2 |P| + sum_{j in P} cost_jk] - sum_r mu_r (|C_r| - 1)
///
/// with cost_jk the sum of mu_r over rows containing (j,k). Big-M bounds are
/// dropped, so L(mu) bounds every integral completion of the node for any
/// mu >= 0. Rows live in a pool that only grows; mu is indexed by row.
class SubsetBound {
 public:
  struct Result {
    double bound = -std::numeric_limits<double>::infinity();
    std::vector<std::uint32_t> choice;  // parent mask per column at the best mu
    std::vector<std::pair<std::size_t, double>> mu;  // positive multipliers (row, value), by row
    Vector cost;                        // per pair, at the best mu
    std::vector<Edge> edges;            // union of the chosen parent sets, sorted
    bool acyclic = false;
    double slack = 0.0;                 // sum mu_r (rhs_r - used_r): score(edges) - bound
  };

  /// Disabled (enabled() == false) when some column has more than
  /// `max_degree` superstructure sources.
  SubsetBound(const MicpProblem& p, std::size_t max_degree, std::size_t max_rows = 20000);

  bool enabled() const { return enabled_; }
  std::size_t rows() const { return rows_.size(); }

  /// Projected subgradient ascent from `warm_mu` with Polyak steps against
  /// `upper_bound`. Works on the rows of `warm_mu` plus the shortest cycles
  /// through the chosen edges at each iterate; new cycles join the pool.
  Result evaluate(const std::vector<signed char>& fixed, const std::vector<std::pair<std::size_t, double>>& warm_mu,
                  double upper_bound, int iterations);

  /// Score increase of column `to` when `from` is excluded from its parents,
  /// under the costs and fixings of `r`.
  double removal_cost(const Result& r, const std::vector<signed char>& fixed, std::size_t from, std::size_t to) const;

  std::size_t column_degree(std::size_t k) const { return sources_[k].size(); }

  /// Best parent set of column k among sources with allowed[source] != 0,
  /// on the plain score (no multipliers, no fixings).
  std::pair<std::vector<std::size_t>, double> best_parents(std::size_t k, const std::vector<char>& allowed) const;

 private:
  struct ColumnPick {
    std::uint32_t mask;
    double value;
  };
  struct Row {
    std::vector<std::size_t> pairs;  // sorted pair indices
    double rhs;
  };
  ColumnPick best_mask(std::size_t k, std::uint32_t ones, std::uint32_t zeros, const Vector& cost) const;
  void masks_for(std::size_t k, const std::vector<signed char>& fixed, std::uint32_t& ones, std::uint32_t& zeros) const;
  bool chosen(const std::vector<std::uint32_t>& choice, std::size_t q) const;
  /// Row indices of the shortest cycle through each chosen edge.
  std::vector<std::size_t> separate(const std::vector<std::uint32_t>& choice);

  const MicpProblem& p_;
  bool enabled_ = false;
  std::size_t max_rows_;
  std::vector<std::vector<std::size_t>> sources_;  // per column, source nodes
  std::vector<std::vector<std::size_t>> pair_of_;  // per column, pair index per source bit
  std::vector<std::size_t> bit_of_;                // per pair, bit position in its column
  std::vector<std::vector<double>> score_;         // per column, per mask
  std::vector<Row> rows_;
  std::map<std::vector<std::size_t>, std::size_t> known_;  // sorted pair list -> row
  mutable std::vector<double> scratch_;
};

}  // namespace micpdag
