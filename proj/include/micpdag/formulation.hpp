#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "micpdag/model.hpp"
#include "micpdag/numerics.hpp"

namespace micpdag {

/// Lower bound carried by every Gamma_ii in relaxations and OA cuts.
inline constexpr double kDiagonalFloor = 1e-6;

/// Tolerance of the PSD test applied to Q = S - diag(delta).
inline constexpr double kPsdTolerance = 1e-8;

/// Index map of the mixed-integer program's variables, in this order:
/// Gamma diagonal (m), Gamma off-diagonal (one per superstructure pair),
/// g (per pair), psi (m), s off-diagonal (per pair), s diagonal (m), T (m).
struct VariableLayout {
  std::size_t m = 0;
  std::size_t pairs = 0;

  std::size_t gamma_diag(std::size_t i) const { return i; }
  std::size_t gamma_off(std::size_t p) const { return m + p; }
  std::size_t g(std::size_t p) const { return m + pairs + p; }
  std::size_t psi(std::size_t i) const { return m + 2 * pairs + i; }
  std::size_t s_off(std::size_t p) const { return 2 * m + 2 * pairs + p; }
  std::size_t s_diag(std::size_t i) const { return 2 * m + 3 * pairs + i; }
  std::size_t t(std::size_t i) const { return 3 * m + 3 * pairs + i; }
  std::size_t total() const { return 4 * m + 3 * pairs; }

  std::size_t binaries() const { return pairs; }
  std::size_t psi_count() const { return m; }
  std::size_t s_count() const { return pairs + m; }
  std::size_t t_count() const { return m; }
};

/// Immutable instance of the perspective-strengthened layered-network program.
class MicpProblem {
 public:
  MicpProblem(SymmetricMatrix s, EdgeSet e_super, double lambda_sq, double big_m, Vector delta);

  std::size_t m() const { return s_.dim(); }
  const SymmetricMatrix& s() const { return s_; }
  const SymmetricMatrix& q() const { return q_; }
  const EdgeSet& e_super() const { return e_super_; }
  double lambda_sq() const { return lambda_sq_; }
  double big_m() const { return big_m_; }
  const Vector& delta() const { return delta_; }
  const VariableLayout& layout() const { return layout_; }

  /// Superstructure pairs in lexicographic order; pair index p refers here.
  const std::vector<Edge>& pairs() const { return pairs_; }
  std::optional<std::size_t> pair_index(std::size_t from, std::size_t to) const;
  /// Pair indices (j,k) entering column k.
  const std::vector<std::size_t>& column_pairs(std::size_t k) const { return column_pairs_[k]; }

 private:
  SymmetricMatrix s_;
  EdgeSet e_super_;
  double lambda_sq_;
  double big_m_;
  Vector delta_;
  SymmetricMatrix q_;
  std::vector<Edge> pairs_;
  std::vector<std::vector<std::size_t>> column_pairs_;
  VariableLayout layout_;
};

/// Maximizes sum(delta) subject to S - diag(delta) PSD, delta >= 0.
Vector choose_delta(const SymmetricMatrix& s);

/// Cycle-unconstrained closed-form fit: every column regressed on all of its
/// superstructure sources. Singular blocks get a 1e-8 ridge.
Matrix unconstrained_gamma(const SymmetricMatrix& s, const EdgeSet& e_super);

/// M = 2 max |Gamma_hat_ij| over superstructure pairs and the diagonal.
double calibrate_big_m(const SymmetricMatrix& s, const EdgeSet& e_super);

MicpProblem build_problem(const SymmetricMatrix& s, const EdgeSet& e_super, double lambda_sq);

/// Objective of the strengthened program at an integral point with T_i = -2 log Gamma_ii.
/// `g`, `s_off` are indexed by pair; `s_diag` by node.
double micp_objective(const MicpProblem& p, const Matrix& gamma, const Vector& g, const Vector& s_off,
                      const Vector& s_diag);

/// True when (gamma, g) satisfies the big-M bounds, the diagonal floor and
/// admits layer values psi in [1, m] for the layered constraints.
bool micp_feasible(const MicpProblem& p, const Matrix& gamma, const Vector& g, double tol = 1e-9);

/// Layer values for an integral g (longest-path layering), or nullopt when
/// the constraints 1 - m + m g_jk <= psi_k - psi_j admit no psi in [1, m].
std::optional<Vector> layer_values(const MicpProblem& p, const Vector& g);

nlohmann::json to_json(const MicpProblem& p);
MicpProblem problem_from_json(const nlohmann::json& j);

}  // namespace micpdag
