#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "micpdag/model.hpp"
#include "micpdag/numerics.hpp"

namespace micpdag {

class NonPositiveDiagonal : public std::invalid_argument {
 public:
  explicit NonPositiveDiagonal(std::size_t i)
      : std::invalid_argument("Gamma diagonal entry " + std::to_string(i) + " is not positive"), index_(i) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class SingularParentBlock : public std::runtime_error {
 public:
  explicit SingularParentBlock(std::size_t node)
      : std::runtime_error("parent block of node " + std::to_string(node) + " is singular"), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Gamma = (I - B) Omega^{-1/2}. Column k holds node k: the diagonal entry and,
/// off the diagonal, -B_jk / sqrt(omega_k) for each parent j. The diagonal is
/// strictly positive and the off-diagonal support is acyclic.
class GammaMatrix {
 public:
  GammaMatrix() = default;
  /// Throws NonPositiveDiagonal or GraphError.
  explicit GammaMatrix(Matrix entries);

  std::size_t m() const { return g_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return g_(i, j); }
  const Matrix& matrix() const { return g_; }

  Dag support() const;
  std::size_t off_diagonal_nonzeros() const;
  bool support_within(const EdgeSet& allowed) const;

  /// B = I - Gamma diag(Gamma)^{-1}, omega_jj = 1 / Gamma_jj^2.
  SemParameters to_sem() const;

  friend bool operator==(const GammaMatrix&, const GammaMatrix&) = default;

 private:
  Matrix g_;
};

struct DagScore {
  GammaMatrix gamma;
  double objective = 0.0;
  std::size_t penalty_edges = 0;
};

/// sum_i -2 log Gamma_ii + tr(Gamma Gamma^T S) + lambda_sq * ||Gamma - diag(Gamma)||_0.
double objective(const GammaMatrix& gamma, const SymmetricMatrix& s, double lambda_sq);

/// Same value for a raw matrix; throws NonPositiveDiagonal.
double objective(const Matrix& gamma, const SymmetricMatrix& s, double lambda_sq);

/// tr(Gamma Gamma^T S).
double trace_term(const Matrix& gamma, const SymmetricMatrix& s);

/// Closed-form fit of one column: regression of `node` on `parents`.
/// Returns (conditional variance, regression coefficients). Throws
/// SingularParentBlock when the block is not PD or the variance <= 1e-12.
struct ColumnFit {
  double conditional_variance = 0.0;
  Vector coefficients;
};
ColumnFit fit_column(const SymmetricMatrix& s, std::size_t node, const std::vector<std::size_t>& parents,
                     double ridge = 0.0);

/// Unique minimizer of `objective` over Gammas supported on `dag`.
DagScore dag_mle(const SymmetricMatrix& s, const Dag& dag, double lambda_sq);

/// Every labeled DAG on m <= 5 nodes with edges inside `restrict` (all pairs
/// when absent), each exactly once, in a fixed order.
void for_each_dag(std::size_t m, const std::optional<EdgeSet>& restrict, const std::function<void(const Dag&)>& fn);
std::vector<Dag> enumerate_dags(std::size_t m, const std::optional<EdgeSet>& restrict = std::nullopt);

inline constexpr std::size_t kMaxEnumerationNodes = 5;

/// Minimum of dag_mle over all DAGs in `restrict`. Objectives within 1e-9 of
/// the minimum tie; ties go to fewer edges, then the lexicographically
/// smallest edge list.
DagScore brute_force_optimum(const SymmetricMatrix& s, double lambda_sq, const EdgeSet& restrict);

/// -2n sum log Gamma_ii + n tr(Gamma Gamma^T S) + k log n, with k counting
/// every nonzero entry of Gamma including the diagonal.
double bic(const GammaMatrix& gamma, const SymmetricMatrix& s, std::size_t n);

struct LambdaSelection {
  double lambda_sq = 0.0;
  int c = 0;
  GammaMatrix gamma;
  double bic = 0.0;
  std::vector<std::pair<int, double>> bic_by_c;  // grid points that were fitted
};

using FitCallback = std::function<GammaMatrix(double lambda_sq)>;

std::vector<int> default_lambda_grid();  // c = 1..15

/// Fits lambda_sq = c^2 log(m)/n for each c and keeps the smallest BIC, ties
/// to the smaller c. A failing grid point is skipped with a warning; throws
/// std::runtime_error when every point fails.
LambdaSelection select_lambda(const Dataset& data, const FitCallback& fit, const std::vector<int>& c_grid);

double lambda_sq_for(int c, std::size_t m, std::size_t n);

}  // namespace micpdag
