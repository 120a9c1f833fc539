#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "micpdag/formulation.hpp"
#include "micpdag/kernels.hpp"
#include "micpdag/oa.hpp"

namespace micpdag {

/// Per-pair fixing state inside the tree.
inline constexpr signed char kFree = -1;

/// Sparse (row, value) Lagrange multipliers, sorted by row.
using Multipliers = std::vector<std::pair<std::size_t, double>>;

/// Branch-and-bound node: fixed[p] in {kFree, 0, 1} per superstructure pair.
struct BnbNode {
  std::uint64_t id = 0;
  std::vector<signed char> fixed;
  std::size_t depth = 0;
  double parent_bound = -std::numeric_limits<double>::infinity();
  // Both are shared between siblings and often across whole subtrees.
  std::shared_ptr<const Matrix> warm;  // parent's relaxed Gamma, null at the root
  std::shared_ptr<const Multipliers> mu;  // parent's positive cycle-row multipliers, null at the root
};

BnbNode root_node(const MicpProblem& p);

/// Closes the fixings under acyclicity: a free pair (j,k) becomes 0 when k
/// already reaches j through edges fixed to 1. Returns nullopt when the
/// fixed-to-1 edges contain a cycle.
std::optional<std::vector<signed char>> propagate_fixings(const MicpProblem& p, const std::vector<signed char>& fixed);

/// Convex penalty of a free edge after minimizing out s and g:
///   phi(a) = min { delta_j s + lambda^2 g : s g >= a^2, a <= M g, g <= 1 },  a = |Gamma_jk|.
struct EdgePenalty {
  double delta = 0.0;
  double lambda_sq = 0.0;
  double big_m = 1.0;
  bool fixed_one = false;

  double value(double a) const;
  /// Relaxed indicator attaining value(a).
  double indicator(double a) const;
  /// argmin over t in [-M, M] of  curvature t^2 + linear t + value(|t|).
  double minimize(double curvature, double linear) const;
};

/// Diagonal term  delta_k x^2 + L(x) on [kDiagonalFloor, M], with L either
/// the cut envelope (epigraph of T) or the exact -2 log x.
struct DiagonalTerm {
  double delta = 0.0;
  double big_m = 1.0;
  const CutEnvelope* envelope = nullptr;  // exact log when null

  double log_part(double x) const;
  double value(double x) const { return delta * x * x + log_part(x); }
  double minimize(double curvature, double linear) const;
};

struct RelaxOptions {
  double tol = 1e-6;          // target gap between relaxed value and its certified bound
  int max_sweeps = 20000;
  int check_every = 4;
  bool exact_log = false;     // replace the cut envelope by -2 log Gamma_ii
  /// Optional extra linear cost on each g (per pair), added to lambda^2.
  const Vector* pair_cost = nullptr;
  kernels::Exec exec = kernels::Exec::parallel;
};

enum class RelaxStatus { ok, infeasible, stall };

struct RelaxedPoint {
  Matrix gamma;
  Vector g;       // per pair
  Vector s_off;   // per pair
  Vector s_diag;  // per node
  Vector t;       // per node: envelope value, or -2 log in exact mode
};

struct RelaxResult {
  RelaxStatus status = RelaxStatus::ok;
  double value = std::numeric_limits<double>::infinity();        // objective at the returned point
  double lower_bound = std::numeric_limits<double>::infinity();  // certified bound for the node
  RelaxedPoint point;
  std::vector<signed char> fixed;  // fixings after propagation
  int sweeps = 0;
};

/// Continuous relaxation of the node. Layered constraints are not part of
/// the continuous problem; they act through propagate_fixings and the
/// integral-point cycle check in the tree search. The bound certificate
/// linearizes the quadratic at the final point, so it is valid whether or
/// not the descent converged.
RelaxResult solve_node_relaxation(const MicpProblem& p, const BnbNode& node, const CutPool& cuts,
                                  const RelaxOptions& opt = {});

/// True when every g is within tol of 0 or 1.
bool is_integral(const Vector& g, double tol = 1e-6);

}  // namespace micpdag
