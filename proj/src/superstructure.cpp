#include "micpdag/superstructure.hpp"

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace micpdag {

GlassoConfig GlassoConfig::defaults_for(std::size_t m, std::size_t n) {
  GlassoConfig cfg;
  cfg.lambda_glasso_sq = std::log(static_cast<double>(m)) / static_cast<double>(n);
  cfg.threshold_tau = 0.1;
  return cfg;
}

void GlassoConfig::validate() const {
  if (!(lambda_glasso_sq >= 0.0)) throw std::invalid_argument("glasso: lambda must be >= 0");
  if (!(threshold_tau >= 0.0)) throw std::invalid_argument("glasso: threshold must be >= 0");
  if (!(tol > 0.0)) throw std::invalid_argument("glasso: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("glasso: max_iter must be >= 1");
}

MaxIterExceeded::MaxIterExceeded(GlassoResult last, double residual)
    : std::runtime_error("graphical lasso did not converge (residual " + std::to_string(residual) + ")"),
      last_(std::move(last)),
      residual_(residual) {}

namespace {

double smooth_part(const Matrix& chol, const SymmetricMatrix& theta, const SymmetricMatrix& s) {
  double tr = 0.0;
  for (std::size_t i = 0; i < s.dim(); ++i)
    for (std::size_t j = 0; j < s.dim(); ++j) tr += theta(i, j) * s(i, j);
  return -log_det_from_cholesky(chol) + tr;
}

double l1_offdiag(const SymmetricMatrix& theta) {
  double v = 0.0;
  for (std::size_t i = 0; i < theta.dim(); ++i)
    for (std::size_t j = 0; j < theta.dim(); ++j)
      if (i != j) v += std::abs(theta(i, j));
  return v;
}

double residual_from_gradient(const SymmetricMatrix& theta, const Matrix& grad, double lambda) {
  double r = 0.0;
  for (std::size_t i = 0; i < theta.dim(); ++i)
    for (std::size_t j = 0; j < theta.dim(); ++j) {
      const double g = grad(i, j);
      double v = 0.0;
      if (i == j) {
        v = std::abs(g);
      } else if (theta(i, j) != 0.0) {
        v = std::abs(g + lambda * std::copysign(1.0, theta(i, j)));
      } else {
        v = std::max(0.0, std::abs(g) - lambda);
      }
      r = std::max(r, v);
    }
  return r;
}

Matrix gradient(const SymmetricMatrix& theta, const SymmetricMatrix& s) {
  return s.matrix() - spd_inverse(theta);
}

}  // namespace

double glasso_objective(const SymmetricMatrix& theta, const SymmetricMatrix& s, double lambda) {
  return smooth_part(cholesky(theta), theta, s) + lambda * l1_offdiag(theta);
}

double glasso_residual(const SymmetricMatrix& theta, const SymmetricMatrix& s, double lambda) {
  return residual_from_gradient(theta, gradient(theta, s), lambda);
}

namespace {

GlassoResult ista(const SymmetricMatrix& s, const GlassoConfig& cfg) {
  const std::size_t m = s.dim();
  const double lambda = cfg.lambda_glasso_sq;

  Vector init(m);
  for (std::size_t i = 0; i < m; ++i) init[i] = 1.0 / (s(i, i) + lambda);
  SymmetricMatrix theta = SymmetricMatrix::diagonal(init);
  Matrix chol = cholesky(theta);
  double f = smooth_part(chol, theta, s);
  Matrix grad = gradient(theta, s);

  GlassoResult result{theta, 0, residual_from_gradient(theta, grad, lambda), {f + lambda * l1_offdiag(theta)}};
  if (result.residual <= cfg.tol) return result;

  double step = 1.0;
  Matrix prev_theta;
  Matrix prev_grad;
  for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
    if (iter > 1) {
      // Barzilai-Borwein initial step; backtracking below keeps descent.
      double num = 0.0;
      double den = 0.0;
      for (std::size_t k = 0; k < grad.values().size(); ++k) {
        const double dt = theta.matrix().values()[k] - prev_theta.values()[k];
        const double dg = grad.values()[k] - prev_grad.values()[k];
        num += dt * dt;
        den += dt * dg;
      }
      step = (den > 0.0 && num > 0.0) ? std::clamp(num / den, 1e-10, 1e6) : step;
    }

    bool accepted = false;
    SymmetricMatrix cand;
    Matrix cand_chol;
    double cand_f = 0.0;
    for (int bt = 0; bt < 80; ++bt, step *= 0.5) {
      Matrix next(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double v = theta(i, j) - step * grad(i, j);
          if (i == j) {
            next(i, j) = v;
          } else {
            const double shrink = std::abs(v) - step * lambda;
            next(i, j) = shrink > 0.0 ? std::copysign(shrink, v) : 0.0;
          }
        }
      cand = SymmetricMatrix(std::move(next));
      if (!is_positive_definite(cand.shifted(-cfg.pd_floor))) continue;
      auto l = try_cholesky(cand);
      if (!l) continue;
      cand_chol = std::move(*l);
      cand_f = smooth_part(cand_chol, cand, s);
      double lin = 0.0;
      double sq = 0.0;
      for (std::size_t k = 0; k < grad.values().size(); ++k) {
        const double d = cand.matrix().values()[k] - theta.matrix().values()[k];
        lin += grad.values()[k] * d;
        sq += d * d;
      }
      if (cand_f <= f + lin + sq / (2.0 * step) + 1e-15 * std::abs(f)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.residual = residual_from_gradient(theta, grad, lambda);
      throw MaxIterExceeded(result, result.residual);
    }

    prev_theta = theta.matrix();
    prev_grad = grad;
    theta = std::move(cand);
    chol = std::move(cand_chol);
    f = cand_f;
    grad = gradient(theta, s);

    result.theta = theta;
    result.iterations = iter;
    result.objective_trace.push_back(f + lambda * l1_offdiag(theta));
    result.residual = residual_from_gradient(theta, grad, lambda);
    if (result.residual <= cfg.tol) return result;
  }
  throw MaxIterExceeded(result, result.residual);
}

// Runs on the correlation-scaled problem R = D^-1/2 S D^-1/2 with weights
// lambda / sqrt(S_ii S_jj); theta = D^-1/2 theta_r D^-1/2 maps back and the
// two objectives differ by a constant.
GlassoResult newton(const SymmetricMatrix& s, const GlassoConfig& cfg) {
  const std::size_t m = s.dim();
  const double lambda = cfg.lambda_glasso_sq;
  Vector scale(m);
  for (std::size_t i = 0; i < m; ++i) scale[i] = 1.0 / std::sqrt(s(i, i));
  Matrix rm(m, m);
  Matrix lam(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      rm(i, j) = s(i, j) * scale[i] * scale[j];
      lam(i, j) = i == j ? 0.0 : lambda * scale[i] * scale[j];
    }
  const SymmetricMatrix r(std::move(rm));
  auto unscale = [&](const SymmetricMatrix& t) {
    Matrix o(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) o(i, j) = t(i, j) * scale[i] * scale[j];
    return SymmetricMatrix(std::move(o));
  };
  auto scaled_objective = [&](const SymmetricMatrix& t, const Matrix& chol) {
    double v = -log_det_from_cholesky(chol);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) v += t(i, j) * r(i, j) + lam(i, j) * std::abs(t(i, j));
    return v;
  };
  // Positive definiteness of theta above pd_floor, checked in original units.
  auto admissible = [&](const SymmetricMatrix& t) { return is_positive_definite(unscale(t).shifted(-cfg.pd_floor)); };

  Vector init(m);
  for (std::size_t i = 0; i < m; ++i) init[i] = s(i, i) / (s(i, i) + lambda);
  SymmetricMatrix theta = SymmetricMatrix::diagonal(init);
  Matrix w = spd_inverse(theta);
  double f = scaled_objective(theta, cholesky(theta));
  GlassoResult result{unscale(theta), 0, 0.0, {}};
  result.residual = glasso_residual(result.theta, s, lambda);
  result.objective_trace.push_back(glasso_objective(result.theta, s, lambda));
  if (result.residual <= cfg.tol) return result;

  auto soft = [](double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); };
  for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
    // Direction: argmin_D tr(G D) + tr(W D W D)/2 + sum lam_ij |theta_ij + D_ij|
    Matrix d(m, m);
    Matrix u(m, m);  // D W
    for (int sw = 0; sw < 200; ++sw) {
      double moved = 0.0;  // largest model-gradient change of a coordinate step
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
          double wu = 0.0;
          for (std::size_t k = 0; k < m; ++k) wu += w(i, k) * u(k, j);
          double a;
          double mu;
          if (i == j) {
            a = w(i, i) * w(i, i);
            mu = -(r(i, i) - w(i, i) + wu) / a;
          } else {
            a = w(i, j) * w(i, j) + w(i, i) * w(j, j);
            const double b = r(i, j) - w(i, j) + wu;
            const double c = theta(i, j) + d(i, j);
            mu = -c + soft(c - b / a, lam(i, j) / a);
          }
          if (mu == 0.0) continue;
          moved = std::max(moved, a * std::abs(mu));
          d(i, j) += mu;
          for (std::size_t k = 0; k < m; ++k) u(i, k) += mu * w(j, k);
          if (i != j) {
            d(j, i) += mu;
            for (std::size_t k = 0; k < m; ++k) u(j, k) += mu * w(i, k);
          }
        }
      if (moved <= 1e-3 * cfg.tol) break;
    }

    double decrease = 0.0;  // directional derivative bound of the objective
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        decrease += (r(i, j) - w(i, j)) * d(i, j) + lam(i, j) * (std::abs(theta(i, j) + d(i, j)) - std::abs(theta(i, j)));

    bool accepted = false;
    SymmetricMatrix cand;
    double cand_f = 0.0;
    for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
      Matrix next = theta.matrix();
      for (std::size_t k = 0; k < next.values().size(); ++k) next.values()[k] += alpha * d.values()[k];
      cand = SymmetricMatrix(std::move(next));
      if (!admissible(cand)) continue;
      auto chol = try_cholesky(cand);
      if (!chol) continue;
      cand_f = scaled_objective(cand, *chol);
      if (cand_f <= f + 1e-3 * alpha * std::min(decrease, 0.0)) {
        accepted = cand_f <= f;
        break;
      }
    }
    if (!accepted) throw MaxIterExceeded(result, result.residual);
    theta = std::move(cand);
    f = cand_f;
    w = spd_inverse(theta);
    result.theta = unscale(theta);
    result.iterations = iter;
    result.objective_trace.push_back(glasso_objective(result.theta, s, lambda));
    result.residual = glasso_residual(result.theta, s, lambda);
    if (result.residual <= cfg.tol) return result;
  }
  throw MaxIterExceeded(result, result.residual);
}

}  // namespace

GlassoResult graphical_lasso(const SymmetricMatrix& s, const GlassoConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (!(s(i, i) > 0.0)) throw std::invalid_argument("graphical_lasso: covariance needs a positive diagonal");
  return cfg.method == GlassoMethod::newton ? newton(s, cfg) : ista(s, cfg);
}

EdgeSet threshold_precision(const SymmetricMatrix& theta, double tau) {
  EdgeSet e(theta.dim());
  for (std::size_t i = 0; i < theta.dim(); ++i)
    for (std::size_t j = i + 1; j < theta.dim(); ++j)
      if (std::abs(theta(i, j)) > tau) e.insert_undirected(i, j);
  return e;
}

EdgeSet estimate_superstructure(const Dataset& data, const GlassoConfig& cfg) {
  const SymmetricMatrix s = sample_covariance(data);
  const GlassoResult fit = graphical_lasso(s, cfg);
  spdlog::debug("graphical lasso converged in {} iterations (residual {:.2e})", fit.iterations, fit.residual);
  return threshold_precision(fit.theta, cfg.threshold_tau);
}

EdgeSet estimate_superstructure(const Dataset& data) {
  return estimate_superstructure(data, GlassoConfig::defaults_for(data.m(), data.n()));
}

}  // namespace micpdag
