#pragma once

#include <stdexcept>
#include <vector>

#include "micpdag/model.hpp"
#include "micpdag/numerics.hpp"

namespace micpdag {

enum class GlassoMethod { newton, ista };

struct GlassoConfig {
  GlassoMethod method = GlassoMethod::newton;
  double lambda_glasso_sq = 0.0;  // off-diagonal l1 weight
  double threshold_tau = 0.1;     // |Theta_ij| > tau keeps the pair
  std::size_t max_iter = 5000;
  double tol = 1e-6;              // entrywise subgradient residual
  double pd_floor = 1e-8;         // iterates keep Theta - pd_floor*I positive definite

  /// lambda^2 = log(m)/n, tau = 0.1.
  static GlassoConfig defaults_for(std::size_t m, std::size_t n);
  void validate() const;
};

struct GlassoResult {
  SymmetricMatrix theta;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> objective_trace;  // one value per accepted iterate, starting at the initial point
};

class MaxIterExceeded : public std::runtime_error {
 public:
  MaxIterExceeded(GlassoResult last, double residual);
  const GlassoResult& last() const { return last_; }
  double residual() const { return residual_; }

 private:
  GlassoResult last_;
  double residual_;
};

/// -log det(Theta) + tr(Theta S) + lambda * sum_{i != j} |Theta_ij|.
double glasso_objective(const SymmetricMatrix& theta, const SymmetricMatrix& s, double lambda);

/// Largest entrywise violation of the first-order optimality conditions.
double glasso_residual(const SymmetricMatrix& theta, const SymmetricMatrix& s, double lambda);

/// newton: proximal Newton steps, the l1-regularized quadratic model solved
/// by coordinate descent, Armijo backtracking on the true objective.
/// ista: proximal gradient with Barzilai-Borwein steps and backtracking.
/// Either way each accepted step decreases the objective and keeps Theta
/// positive definite above cfg.pd_floor. max_iter counts outer steps.
GlassoResult graphical_lasso(const SymmetricMatrix& s, const GlassoConfig& cfg);

/// Symmetric pairs whose off-diagonal magnitude exceeds the threshold.
EdgeSet threshold_precision(const SymmetricMatrix& theta, double tau);

EdgeSet estimate_superstructure(const Dataset& data, const GlassoConfig& cfg);
EdgeSet estimate_superstructure(const Dataset& data);

}  // namespace micpdag
