#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <variant>
#include <vector>

#include "micpdag/numerics.hpp"

namespace micpdag {

/// Directed pair (from, to) with 0-based node indices.
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  auto operator<=>(const Edge&) const = default;
};

using BoolMatrix = std::vector<std::vector<bool>>;

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// True iff the directed graph (m, edges) has a topological order (Kahn).
bool is_acyclic(std::size_t m, const std::vector<Edge>& edges);

/// Kahn order, or nullopt when a cycle exists. Ties go to the smallest index.
std::optional<std::vector<std::size_t>> topological_order(std::size_t m, const std::vector<Edge>& edges);

/// Set of ordered pairs without self-loops; used for superstructures and
/// symmetric (moral/skeleton) graphs.
class EdgeSet {
 public:
  EdgeSet() = default;
  explicit EdgeSet(std::size_t m) : m_(m) {}
  EdgeSet(std::size_t m, const std::vector<Edge>& pairs);

  static EdgeSet complete(std::size_t m);

  std::size_t m() const { return m_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  bool contains(std::size_t from, std::size_t to) const { return pairs_.contains({from, to}); }
  void insert(std::size_t from, std::size_t to);
  /// Inserts both directions.
  void insert_undirected(std::size_t a, std::size_t b);

  const std::set<Edge>& pairs() const { return pairs_; }
  std::vector<Edge> to_vector() const { return {pairs_.begin(), pairs_.end()}; }
  std::vector<std::size_t> sources_into(std::size_t to) const;
  bool is_symmetric() const;

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;

 private:
  std::size_t m_ = 0;
  std::set<Edge> pairs_;
};

class Dag {
 public:
  Dag() = default;
  /// Throws GraphError on out-of-range nodes, self-loops, duplicates or cycles.
  Dag(std::size_t m, std::vector<Edge> edges);

  std::size_t m() const { return m_; }
  const std::vector<Edge>& edges() const { return edges_; }  // sorted
  std::size_t edge_count() const { return edges_.size(); }
  bool has_edge(std::size_t from, std::size_t to) const;
  bool adjacent(std::size_t a, std::size_t b) const { return has_edge(a, b) || has_edge(b, a); }
  std::vector<std::size_t> parents(std::size_t node) const;
  const std::vector<std::size_t>& order() const { return order_; }
  BoolMatrix adjacency() const;
  EdgeSet as_edge_set() const { return EdgeSet(m_, edges_); }

  friend bool operator==(const Dag& a, const Dag& b) { return a.m_ == b.m_ && a.edges_ == b.edges_; }

 private:
  std::size_t m_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> order_;
};

/// Completed partially directed graph as a boolean adjacency matrix:
/// i->j sets (i,j) only, i-j sets both entries.
class Cpdag {
 public:
  Cpdag() = default;
  explicit Cpdag(BoolMatrix adjacency);

  std::size_t m() const { return adj_.size(); }
  bool operator()(std::size_t i, std::size_t j) const { return adj_[i][j]; }
  const BoolMatrix& adjacency() const { return adj_; }
  bool directed(std::size_t i, std::size_t j) const { return adj_[i][j] && !adj_[j][i]; }
  bool undirected(std::size_t i, std::size_t j) const { return adj_[i][j] && adj_[j][i]; }

  friend bool operator==(const Cpdag&, const Cpdag&) = default;

 private:
  BoolMatrix adj_;
};

/// Linear SEM X = B^T X + eps with eps_j ~ (0, omega_j).
struct SemParameters {
  Matrix b;
  Vector omega;

  std::size_t m() const { return omega.size(); }
  /// Throws std::invalid_argument on a nonzero diagonal, cyclic support or
  /// non-positive variance.
  void validate() const;
  Dag support() const;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Matrix x);  // n x m, finite
  std::size_t n() const { return x_.rows(); }
  std::size_t m() const { return x_.cols(); }
  const Matrix& x() const { return x_; }
  /// Column-wise rescaling to unit empirical second moment.
  Dataset standardized() const;

 private:
  Matrix x_;
};

struct GaussianNoise {};
struct PowerNoise {
  double exponent = 1.0;
};
using NoiseSpec = std::variant<GaussianNoise, PowerNoise>;

struct ValueSet {
  std::vector<double> values;
};
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
using VarianceSpec = std::variant<ValueSet, Interval>;

/// Sigma* = (I-B)^{-T} Omega (I-B)^{-1}.
SymmetricMatrix population_covariance(const SemParameters& params);

/// Deterministic given seed; column j of the noise uses substream (seed, noise, j).
Dataset generate_data(const SemParameters& params, std::size_t n, const NoiseSpec& noise, std::uint64_t seed);

SemParameters random_sem(const Dag& dag, const std::vector<double>& weight_set,
                         const VarianceSpec& variances, std::uint64_t seed);

/// Random DAG on m nodes with `edges` edges: a uniformly random node order,
/// then `edges` distinct forward pairs chosen uniformly.
Dag random_dag(std::size_t m, std::size_t edges, std::uint64_t seed);

/// X^T X / n, no re-centering.
SymmetricMatrix sample_covariance(const Dataset& data);

/// Symmetric skeleton plus parent pairs sharing a child.
EdgeSet moral_graph(const Dag& dag);

/// Symmetric skeleton of the DAG.
EdgeSet skeleton(const Dag& dag);

}  // namespace micpdag
