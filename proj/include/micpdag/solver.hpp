#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "micpdag/formulation.hpp"
#include "micpdag/oa.hpp"
#include "micpdag/relaxation.hpp"
#include "micpdag/scoring.hpp"

namespace micpdag {

class DegenerateColumn : public std::runtime_error {
 public:
  explicit DegenerateColumn(std::size_t i)
      : std::runtime_error("column " + std::to_string(i) + " of Gamma^T S Gamma is degenerate"), index_(i) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Gamma diag(D)^{1/2} with D_ii = 1 / (Gamma^T S Gamma)_ii, so that the
/// trace term equals m. Never increases the objective.
GammaMatrix rescale_to_trace(const GammaMatrix& gamma, const SymmetricMatrix& s);

enum class GapMode { exact, theorem1, theorem2, custom };

/// exact -> 0, theorem1 -> lambda^2 m(m-1)/4, theorem2 -> c lambda^2,
/// custom -> tau.
double gap_target(GapMode mode, double lambda_sq, std::size_t m, double tau = 0.0, double c = 0.5);
GapMode parse_gap_mode(const std::string& name);

struct SolveConfig {
  double gap_target = 0.0;
  double time_limit_secs = 0.0;  // <= 0: 50 m seconds
  double node_relax_tol = 1e-6;
  double cut_tol = 1e-6;
  bool deterministic = true;
  int worker_count = 0;          // 0: runtime default
  bool fractional_cuts = false;  // OA rounds at fractional nodes too
  bool rounding_heuristic = true;
  bool polish_incumbents = true;  // hill-climb improving heuristic incumbents
  // At non-root nodes whose subset solution has a cycle, branch on that cycle
  // without solving the continuous relaxation.
  bool skip_relaxation_at_cyclic = true;
  std::uint64_t node_limit = 0;  // 0: unlimited
  /// Column-subset bound with dualized pair rows (see SubsetBound). Skipped
  /// automatically when a column has more than max_subset_degree sources.
  bool subset_bounds = true;
  std::size_t max_subset_degree = 12;
  int lagrange_iterations = 5;

  void validate() const;
  double effective_time_limit(std::size_t m) const;
};

enum class SolveStatus { optimal, gap_reached, time_limit };
std::string to_string(SolveStatus s);

struct BoundEvent {
  double wall = 0.0;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  std::uint64_t node = 0;
};

struct SolveReport {
  GammaMatrix incumbent;
  Vector g;  // per superstructure pair
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  double rgap = 0.0;
  std::uint64_t nodes_explored = 0;
  std::size_t oa_cuts_added = 0;
  double wall_secs = 0.0;
  SolveStatus status = SolveStatus::optimal;
  std::vector<BoundEvent> events;

  Dag dag() const { return incumbent.support(); }
};

nlohmann::json to_json(const SolveReport& r, const MicpProblem& p);
/// "wall,upper_bound,lower_bound,node" rows.
std::string events_csv(const SolveReport& r);

/// Greedy sink ordering on the cycle-unconstrained fit: the next sink is the
/// remaining node with the smallest conditional variance given its remaining
/// superstructure sources, which become its parents.
Dag greedy_initial_dag(const MicpProblem& p);

SolveReport branch_and_bound(const MicpProblem& p, const SolveConfig& cfg);

}  // namespace micpdag
