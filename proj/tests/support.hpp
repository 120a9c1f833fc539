#pragma once
// Shared fixtures and independent oracles for the test binaries. Nothing in
// here calls the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "micpdag/model.hpp"
#include "micpdag/numerics.hpp"
#include "micpdag/rng.hpp"

namespace testing {

using namespace micpdag;

inline Matrix naive_multiply(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

/// G G^T / m + shift I with G standard normal.
inline SymmetricMatrix random_spd(std::size_t m, std::uint64_t seed, double shift = 0.2) {
  Rng rng = make_substream(seed, streams::kInstance, 77);
  std::normal_distribution<double> z;
  Matrix g(m, m);
  for (auto& v : g.values()) v = z(rng);
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += g(i, k) * g(j, k);
      a(i, j) = s / static_cast<double>(m) + (i == j ? shift : 0.0);
    }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  return SymmetricMatrix(a);
}

/// Number of labeled DAGs on n nodes by Robinson's recurrence.
inline std::uint64_t labeled_dag_count(std::size_t n) {
  std::vector<std::uint64_t> a(n + 1, 0);
  a[0] = 1;
  auto binom = [](std::size_t n, std::size_t k) {
    std::uint64_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  for (std::size_t k = 1; k <= n; ++k) {
    long long s = 0;
    for (std::size_t j = 1; j <= k; ++j) {
      const long long term = static_cast<long long>(binom(k, j)) * (1LL << (j * (k - j))) * static_cast<long long>(a[k - j]);
      s += (j % 2 == 1) ? term : -term;
    }
    a[k] = static_cast<std::uint64_t>(s);
  }
  return a[n];
}

/// Every DAG on m nodes by brute force over edge subsets of all ordered
/// pairs, with an explicit DFS cycle test.
inline std::vector<std::vector<Edge>> all_dags_bruteforce(std::size_t m) {
  std::vector<Edge> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) pairs.push_back({i, j});
  std::vector<std::vector<Edge>> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()); ++mask) {
    std::vector<Edge> e;
    bool cyclic = false;
    for (std::size_t p = 0; p < pairs.size(); ++p)
      if (mask >> p & 1u) e.push_back(pairs[p]);
    std::vector<std::vector<std::size_t>> adj(m);
    for (const Edge& x : e) adj[x.from].push_back(x.to);
    std::vector<int> state(m, 0);
    std::function<bool(std::size_t)> cyc = [&](std::size_t u) {
      state[u] = 1;
      for (std::size_t v : adj[u]) {
        if (state[v] == 1) return true;
        if (state[v] == 0 && cyc(v)) return true;
      }
      state[u] = 2;
      return false;
    };
    for (std::size_t u = 0; u < m && !cyclic; ++u)
      if (state[u] == 0 && cyc(u)) cyclic = true;
    if (!cyclic) out.push_back(e);
  }
  return out;
}

/// (skeleton, sorted v-structures) of an edge list, computed directly.
using MecKey = std::pair<std::set<std::pair<std::size_t, std::size_t>>, std::set<std::tuple<std::size_t, std::size_t, std::size_t>>>;
inline MecKey mec_key(std::size_t m, const std::vector<Edge>& edges) {
  MecKey key;
  std::vector<std::vector<bool>> dir(m, std::vector<bool>(m, false));
  for (const Edge& e : edges) {
    dir[e.from][e.to] = true;
    key.first.insert({std::min(e.from, e.to), std::max(e.from, e.to)});
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        if (dir[i][k] && dir[j][k] && !dir[i][j] && !dir[j][i]) key.second.insert({i, k, j});
  return key;
}

/// Minimizes sum -2 log G_ii + tr(G G^T S) + lambda_sq * |support| over G
/// supported on `edges` (plus the diagonal) by exact cyclic coordinate
/// descent. Returns (objective, G).
inline std::pair<double, Matrix> coordinate_descent_fit(const SymmetricMatrix& s, const std::vector<Edge>& edges,
                                                        double lambda_sq, int sweeps = 4000) {
  const std::size_t m = s.dim();
  Matrix g = Matrix::identity(m);
  std::vector<std::vector<std::size_t>> rows(m);
  for (const Edge& e : edges) rows[e.to].push_back(e.from);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t k = 0; k < m; ++k) {
      // Column k: f(c) = -2 log c_k + c^T S c over the free rows.
      for (std::size_t r : rows[k]) {
        double lin = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          if (i != r) lin += s(r, i) * g(i, k);
        g(r, k) = -lin / s(r, r);
      }
      double b = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        if (i != k) b += 2.0 * s(k, i) * g(i, k);
      const double a = s(k, k);
      g(k, k) = (-b + std::sqrt(b * b + 16.0 * a)) / (4.0 * a);
    }
  }
  double obj = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    obj -= 2.0 * std::log(g(k, k));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) obj += g(i, k) * s(i, j) * g(j, k);
  }
  return {obj + lambda_sq * static_cast<double>(edges.size()), g};
}

/// Objective with explicit loops.
inline double naive_objective(const Matrix& g, const SymmetricMatrix& s, double lambda_sq) {
  const std::size_t m = s.dim();
  double v = 0.0;
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < m; ++i) {
    v -= 2.0 * std::log(g(i, i));
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && g(i, j) != 0.0) ++nnz;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double ggt = 0.0;
      for (std::size_t k = 0; k < m; ++k) ggt += g(i, k) * g(j, k);
      v += ggt * s(j, i);
    }
  return v + lambda_sq * static_cast<double>(nnz);
}

}  // namespace testing
