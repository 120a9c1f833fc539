#include "micpdag/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "micpdag/kernels.hpp"

namespace micpdag {

GammaMatrix::GammaMatrix(Matrix entries) : g_(std::move(entries)) {
  if (!g_.square() || g_.rows() == 0) throw std::invalid_argument("Gamma must be a non-empty square matrix");
  for (std::size_t i = 0; i < g_.rows(); ++i)
    if (!(g_(i, i) > 0.0)) throw NonPositiveDiagonal(i);
  (void)support();
}

Dag GammaMatrix::support() const {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m(); ++i)
    for (std::size_t j = 0; j < m(); ++j)
      if (i != j && g_(i, j) != 0.0) edges.push_back({i, j});
  return Dag(m(), std::move(edges));
}

std::size_t GammaMatrix::off_diagonal_nonzeros() const {
  std::size_t k = 0;
  for (std::size_t i = 0; i < m(); ++i)
    for (std::size_t j = 0; j < m(); ++j)
      if (i != j && g_(i, j) != 0.0) ++k;
  return k;
}

bool GammaMatrix::support_within(const EdgeSet& allowed) const {
  for (std::size_t i = 0; i < m(); ++i)
    for (std::size_t j = 0; j < m(); ++j)
      if (i != j && g_(i, j) != 0.0 && !allowed.contains(i, j)) return false;
  return true;
}

SemParameters GammaMatrix::to_sem() const {
  const std::size_t n = m();
  SemParameters p{Matrix(n, n), Vector(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double d = g_(k, k);
    p.omega[k] = 1.0 / (d * d);
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) p.b(j, k) = -g_(j, k) / d;
  }
  return p;
}

double trace_term(const Matrix& gamma, const SymmetricMatrix& s) {
  const std::size_t m = gamma.rows();
  double tr = 0.0;
  Vector col(m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) col[i] = gamma(i, k);
    for (std::size_t i = 0; i < m; ++i) {
      if (col[i] == 0.0) continue;
      double si = 0.0;
      for (std::size_t j = 0; j < m; ++j) si += s(i, j) * col[j];
      tr += col[i] * si;
    }
  }
  return tr;
}

double objective(const Matrix& gamma, const SymmetricMatrix& s, double lambda_sq) {
  const std::size_t m = gamma.rows();
  if (gamma.cols() != m || s.dim() != m) throw std::invalid_argument("objective: dimension mismatch");
  double logs = 0.0;
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(gamma(i, i) > 0.0)) throw NonPositiveDiagonal(i);
    logs += -2.0 * std::log(gamma(i, i));
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && gamma(i, j) != 0.0) ++nnz;
  }
  return logs + trace_term(gamma, s) + lambda_sq * static_cast<double>(nnz);
}

double objective(const GammaMatrix& gamma, const SymmetricMatrix& s, double lambda_sq) {
  return objective(gamma.matrix(), s, lambda_sq);
}

ColumnFit fit_column(const SymmetricMatrix& s, std::size_t node, const std::vector<std::size_t>& parents, double ridge) {
  ColumnFit fit;
  if (parents.empty()) {
    fit.conditional_variance = s(node, node);
  } else {
    SymmetricMatrix block = s.principal(parents);
    if (ridge > 0.0) block = block.shifted(ridge);
    Vector rhs(parents.size());
    for (std::size_t a = 0; a < parents.size(); ++a) rhs[a] = s(parents[a], node);
    auto l = try_cholesky(block);
    if (!l) throw SingularParentBlock(node);
    fit.coefficients = cholesky_solve(*l, rhs);
    fit.conditional_variance = s(node, node) - dot(rhs, fit.coefficients);
  }
  if (!(fit.conditional_variance > 1e-12)) throw SingularParentBlock(node);
  return fit;
}

DagScore dag_mle(const SymmetricMatrix& s, const Dag& dag, double lambda_sq) {
  const std::size_t m = dag.m();
  if (s.dim() != m) throw std::invalid_argument("dag_mle: dimension mismatch");
  Matrix g(m, m);
  double obj = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto parents = dag.parents(j);
    const ColumnFit fit = fit_column(s, j, parents);
    const double gjj = 1.0 / std::sqrt(fit.conditional_variance);
    g(j, j) = gjj;
    for (std::size_t a = 0; a < parents.size(); ++a) g(parents[a], j) = -gjj * fit.coefficients[a];
    obj += 1.0 + std::log(fit.conditional_variance);
  }
  obj += lambda_sq * static_cast<double>(dag.edge_count());
  DagScore score{GammaMatrix(std::move(g)), obj, dag.edge_count()};
  return score;
}

void for_each_dag(std::size_t m, const std::optional<EdgeSet>& restrict, const std::function<void(const Dag&)>& fn) {
  if (m == 0 || m > kMaxEnumerationNodes)
    throw std::invalid_argument("enumerate_dags: m must be in [1, " + std::to_string(kMaxEnumerationNodes) + "]");
  if (restrict && restrict->m() != m) throw std::invalid_argument("enumerate_dags: restriction has wrong node count");
  auto allowed = [&](std::size_t a, std::size_t b) { return !restrict || restrict->contains(a, b); };

  // Each unordered pair takes one of: none, a->b, b->a.
  struct Slot {
    std::size_t a, b;
    std::vector<int> states;
  };
  std::vector<Slot> slots;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      Slot s{a, b, {0}};
      if (allowed(a, b)) s.states.push_back(1);
      if (allowed(b, a)) s.states.push_back(2);
      if (s.states.size() > 1) slots.push_back(std::move(s));
    }
  std::vector<std::size_t> digit(slots.size(), 0);
  std::vector<Edge> edges;
  while (true) {
    edges.clear();
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const int st = slots[k].states[digit[k]];
      if (st == 1) edges.push_back({slots[k].a, slots[k].b});
      if (st == 2) edges.push_back({slots[k].b, slots[k].a});
    }
    if (is_acyclic(m, edges)) fn(Dag(m, edges));
    std::size_t k = 0;
    while (k < slots.size() && ++digit[k] == slots[k].states.size()) {
      digit[k] = 0;
      ++k;
    }
    if (k == slots.size()) break;
  }
}

std::vector<Dag> enumerate_dags(std::size_t m, const std::optional<EdgeSet>& restrict) {
  std::vector<Dag> out;
  for_each_dag(m, restrict, [&](const Dag& d) { out.push_back(d); });
  return out;
}

DagScore brute_force_optimum(const SymmetricMatrix& s, double lambda_sq, const EdgeSet& restrict) {
  const std::vector<Dag> dags = enumerate_dags(s.dim(), restrict);
  const std::vector<double> obj = kernels::score_dags(s, dags, lambda_sq, kernels::Exec::parallel);
  const double best = *std::min_element(obj.begin(), obj.end());
  if (!std::isfinite(best)) throw SingularParentBlock(0);
  std::size_t pick = dags.size();
  for (std::size_t i = 0; i < dags.size(); ++i) {
    if (!(obj[i] <= best + 1e-9)) continue;
    if (pick == dags.size()) {
      pick = i;
      continue;
    }
    const Dag& a = dags[i];
    const Dag& b = dags[pick];
    if (a.edge_count() < b.edge_count() || (a.edge_count() == b.edge_count() && a.edges() < b.edges())) pick = i;
  }
  return dag_mle(s, dags[pick], lambda_sq);
}

double bic(const GammaMatrix& gamma, const SymmetricMatrix& s, std::size_t n) {
  const std::size_t m = gamma.m();
  const double nn = static_cast<double>(n);
  double logs = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    logs += std::log(gamma(i, i));
    for (std::size_t j = 0; j < m; ++j)
      if (gamma(i, j) != 0.0) ++k;
  }
  return -2.0 * nn * logs + nn * trace_term(gamma.matrix(), s) + static_cast<double>(k) * std::log(nn);
}

std::vector<int> default_lambda_grid() {
  std::vector<int> g(15);
  for (int c = 1; c <= 15; ++c) g[c - 1] = c;
  return g;
}

double lambda_sq_for(int c, std::size_t m, std::size_t n) {
  return static_cast<double>(c) * static_cast<double>(c) * std::log(static_cast<double>(m)) / static_cast<double>(n);
}

LambdaSelection select_lambda(const Dataset& data, const FitCallback& fit, const std::vector<int>& c_grid) {
  if (c_grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
  const SymmetricMatrix s = sample_covariance(data);
  std::optional<LambdaSelection> best;
  std::vector<std::pair<int, double>> trace;
  for (int c : c_grid) {
    const double lsq = lambda_sq_for(c, data.m(), data.n());
    try {
      GammaMatrix g = fit(lsq);
      const double score = bic(g, s, data.n());
      trace.emplace_back(c, score);
      // Scores within rounding of each other count as ties.
      const double tol = best ? 1e-9 * std::max(1.0, std::abs(best->bic)) : 0.0;
      if (!best || score < best->bic - tol || (score <= best->bic + tol && c < best->c))
        best = LambdaSelection{lsq, c, std::move(g), score, {}};
    } catch (const std::exception& e) {
      spdlog::warn("lambda grid point c={} failed: {}", c, e.what());
    }
  }
  if (!best) throw std::runtime_error("select_lambda: every grid point failed");
  best->bic_by_c = std::move(trace);
  return *best;
}

}  // namespace micpdag
