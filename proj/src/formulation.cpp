#include "micpdag/formulation.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "micpdag/io.hpp"
#include "micpdag/scoring.hpp"

namespace micpdag {

MicpProblem::MicpProblem(SymmetricMatrix s, EdgeSet e_super, double lambda_sq, double big_m, Vector delta)
    : s_(std::move(s)),
      e_super_(std::move(e_super)),
      lambda_sq_(lambda_sq),
      big_m_(big_m),
      delta_(std::move(delta)),
      q_(s_.minus_diagonal(delta_)),
      pairs_(e_super_.to_vector()),
      column_pairs_(s_.dim()),
      layout_{s_.dim(), pairs_.size()} {
  if (e_super_.m() != s_.dim()) throw std::invalid_argument("problem: superstructure node count mismatch");
  if (!(lambda_sq_ >= 0.0)) throw std::invalid_argument("problem: lambda_sq must be >= 0");
  if (!(big_m_ > 0.0)) throw std::invalid_argument("problem: big M must be > 0");
  for (double d : delta_)
    if (!(d >= 0.0)) throw std::invalid_argument("problem: delta must be non-negative");
  if (!is_psd(q_, kPsdTolerance)) throw std::invalid_argument("problem: S - diag(delta) is not PSD");
  for (std::size_t p = 0; p < pairs_.size(); ++p) column_pairs_[pairs_[p].to].push_back(p);
}

std::optional<std::size_t> MicpProblem::pair_index(std::size_t from, std::size_t to) const {
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), Edge{from, to});
  if (it == pairs_.end() || *it != Edge{from, to}) return std::nullopt;
  return static_cast<std::size_t>(it - pairs_.begin());
}

namespace {

bool feasible_delta(const SymmetricMatrix& s, const Vector& delta) {
  return is_positive_definite(s.minus_diagonal(delta));
}

// Log-barrier Newton iterations for max sum(delta) s.t. S - D > 0, delta > 0.
// Returns a strictly feasible point close to the optimum.
Vector barrier_delta(const SymmetricMatrix& s) {
  const std::size_t m = s.dim();
  const double lmin = min_eigenvalue(s, 1e-10 * std::max(1.0, s.max_diag()));
  if (!(lmin > 1e-10 * s.max_diag())) return Vector(m, 0.0);
  Vector delta(m, 0.5 * lmin);
  const double scale = s.max_diag();

  auto phi = [&](const Vector& d, double mu) {
    auto l = try_cholesky(s.minus_diagonal(d));
    if (!l) return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    for (double x : d) {
      if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
      v += x + mu * std::log(x);
    }
    return v + mu * log_det_from_cholesky(*l);
  };

  for (double mu = scale; mu > 1e-13 * scale; mu *= 0.2) {
    for (int it = 0; it < 100; ++it) {
      const Matrix w = spd_inverse(s.minus_diagonal(delta));
      Vector grad(m);
      Matrix hess(m, m);  // negated Hessian, PD
      for (std::size_t i = 0; i < m; ++i) {
        grad[i] = 1.0 - mu * w(i, i) + mu / delta[i];
        for (std::size_t j = 0; j < m; ++j) hess(i, j) = mu * w(i, j) * w(i, j);
        hess(i, i) += mu / (delta[i] * delta[i]);
      }
      auto l = try_cholesky(SymmetricMatrix(hess));
      if (!l) break;
      const Vector step = cholesky_solve(*l, grad);
      const double decrement = dot(grad, step);
      if (decrement < 1e-14 * scale) break;
      const double base = phi(delta, mu);
      double t = 1.0;
      Vector next(m);
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
        for (std::size_t i = 0; i < m; ++i) next[i] = delta[i] + t * step[i];
        const double v = phi(next, mu);
        if (std::isfinite(v) && v >= base + 0.25 * t * decrement) {
          moved = true;
          break;
        }
      }
      if (!moved) break;
      delta = next;
    }
  }
  return delta;
}

}  // namespace

Vector choose_delta(const SymmetricMatrix& s) {
  const std::size_t m = s.dim();
  Vector delta = barrier_delta(s);
  if (!feasible_delta(s, delta)) delta.assign(m, 0.0);

  // Coordinate ascent: push each delta_i to the PD margin with the others fixed.
  for (int sweep = 0; sweep < 1000; ++sweep) {
    double best_gain = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double lo = delta[i];
      double hi = s(i, i);
      Vector trial = delta;
      const double tol = 1e-14 * std::max(1.0, s(i, i));
      while (hi - lo > tol) {
        trial[i] = 0.5 * (lo + hi);
        if (feasible_delta(s, trial)) {
          lo = trial[i];
        } else {
          hi = trial[i];
        }
      }
      best_gain = std::max(best_gain, lo - delta[i]);
      delta[i] = lo;
    }
    if (best_gain <= 1e-8) break;
  }
  return delta;
}

Matrix unconstrained_gamma(const SymmetricMatrix& s, const EdgeSet& e_super) {
  const std::size_t m = s.dim();
  Matrix g(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto parents = e_super.sources_into(j);
    ColumnFit fit;
    try {
      fit = fit_column(s, j, parents);
    } catch (const SingularParentBlock&) {
      spdlog::warn("big-M heuristic: singular parent block at node {}, using a 1e-8 ridge", j);
      fit = fit_column(s, j, parents, 1e-8);
    }
    const double gjj = 1.0 / std::sqrt(fit.conditional_variance);
    g(j, j) = gjj;
    for (std::size_t a = 0; a < parents.size(); ++a) g(parents[a], j) = -gjj * fit.coefficients[a];
  }
  return g;
}

double calibrate_big_m(const SymmetricMatrix& s, const EdgeSet& e_super) {
  const Matrix g = unconstrained_gamma(s, e_super);
  double mx = 0.0;
  for (std::size_t i = 0; i < s.dim(); ++i) mx = std::max(mx, std::abs(g(i, i)));
  for (const Edge& e : e_super.pairs()) mx = std::max(mx, std::abs(g(e.from, e.to)));
  return 2.0 * mx;
}

MicpProblem build_problem(const SymmetricMatrix& s, const EdgeSet& e_super, double lambda_sq) {
  return MicpProblem(s, e_super, lambda_sq, calibrate_big_m(s, e_super), choose_delta(s));
}

double micp_objective(const MicpProblem& p, const Matrix& gamma, const Vector& g, const Vector& s_off,
                      const Vector& s_diag) {
  const std::size_t m = p.m();
  double v = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(gamma(i, i) > 0.0)) throw NonPositiveDiagonal(i);
    v += -2.0 * std::log(gamma(i, i)) + p.delta()[i] * s_diag[i];
  }
  v += trace_term(gamma, p.q());
  for (std::size_t k = 0; k < p.pairs().size(); ++k) v += p.delta()[p.pairs()[k].from] * s_off[k] + p.lambda_sq() * g[k];
  return v;
}

std::optional<Vector> layer_values(const MicpProblem& p, const Vector& g) {
  const std::size_t m = p.m();
  const double mm = static_cast<double>(m);
  Vector psi(m, 1.0);
  for (std::size_t round = 0; round <= m; ++round) {
    bool changed = false;
    for (std::size_t k = 0; k < p.pairs().size(); ++k) {
      const Edge& e = p.pairs()[k];
      const double need = psi[e.from] + 1.0 - mm + mm * g[k];
      if (need > psi[e.to] + 1e-12) {
        psi[e.to] = need;
        changed = true;
      }
    }
    if (!changed) {
      for (double v : psi)
        if (v > mm + 1e-9) return std::nullopt;
      return psi;
    }
  }
  return std::nullopt;
}

bool micp_feasible(const MicpProblem& p, const Matrix& gamma, const Vector& g, double tol) {
  const std::size_t m = p.m();
  const double bound = p.big_m();
  for (std::size_t i = 0; i < m; ++i) {
    if (gamma(i, i) < kDiagonalFloor - tol || gamma(i, i) > bound + tol) return false;
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && gamma(i, j) != 0.0 && !p.pair_index(i, j)) return false;
  }
  for (std::size_t k = 0; k < p.pairs().size(); ++k) {
    const Edge& e = p.pairs()[k];
    if (g[k] < -tol || g[k] > 1.0 + tol) return false;
    if (std::abs(gamma(e.from, e.to)) > bound * g[k] + tol) return false;
  }
  return layer_values(p, g).has_value();
}

nlohmann::json to_json(const MicpProblem& p) {
  return {{"m", p.m()},
          {"S", io::to_json(p.s().matrix())},
          {"E_super", io::edges_to_json(p.pairs())},
          {"lambda_sq", p.lambda_sq()},
          {"big_m", p.big_m()},
          {"delta", p.delta()}};
}

MicpProblem problem_from_json(const nlohmann::json& j) {
  try {
    SymmetricMatrix s(io::matrix_from_json(j.at("S")));
    EdgeSet e(s.dim());
    for (const auto& pr : j.at("E_super")) e.insert(pr.at(0).get<std::size_t>(), pr.at(1).get<std::size_t>());
    return MicpProblem(std::move(s), std::move(e), j.at("lambda_sq").get<double>(), j.at("big_m").get<double>(),
                       j.at("delta").get<Vector>());
  } catch (const nlohmann::json::exception& err) {
    throw io::ParseError(std::string("problem JSON: ") + err.what());
  }
}

}  // namespace micpdag
