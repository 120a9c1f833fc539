#include "micpdag/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "micpdag/kernels.hpp"
#include "micpdag/rng.hpp"

namespace micpdag {

std::optional<std::vector<std::size_t>> topological_order(std::size_t m, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> children(m);
  std::vector<std::size_t> indegree(m, 0);
  for (const Edge& e : edges) {
    children[e.from].push_back(e.to);
    ++indegree[e.to];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < m; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<std::size_t> order;
  order.reserve(m);
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (std::size_t c : children[v])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() != m) return std::nullopt;
  return order;
}

bool is_acyclic(std::size_t m, const std::vector<Edge>& edges) { return topological_order(m, edges).has_value(); }

EdgeSet::EdgeSet(std::size_t m, const std::vector<Edge>& pairs) : m_(m) {
  for (const Edge& e : pairs) insert(e.from, e.to);
}

EdgeSet EdgeSet::complete(std::size_t m) {
  EdgeSet s(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) s.insert(i, j);
  return s;
}

void EdgeSet::insert(std::size_t from, std::size_t to) {
  if (from >= m_ || to >= m_) throw GraphError("edge (" + std::to_string(from) + "," + std::to_string(to) + ") out of range");
  if (from == to) throw GraphError("self-loop on node " + std::to_string(from));
  pairs_.insert({from, to});
}

void EdgeSet::insert_undirected(std::size_t a, std::size_t b) {
  insert(a, b);
  insert(b, a);
}

std::vector<std::size_t> EdgeSet::sources_into(std::size_t to) const {
  std::vector<std::size_t> out;
  for (const Edge& e : pairs_)
    if (e.to == to) out.push_back(e.from);
  return out;
}

bool EdgeSet::is_symmetric() const {
  return std::all_of(pairs_.begin(), pairs_.end(), [&](const Edge& e) { return contains(e.to, e.from); });
}

Dag::Dag(std::size_t m, std::vector<Edge> edges) : m_(m), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.from >= m_ || e.to >= m_)
      throw GraphError("edge (" + std::to_string(e.from) + "," + std::to_string(e.to) + ") out of range");
    if (e.from == e.to) throw GraphError("self-loop on node " + std::to_string(e.from));
    if (i > 0 && edges_[i - 1] == e)
      throw GraphError("duplicate edge (" + std::to_string(e.from) + "," + std::to_string(e.to) + ")");
  }
  auto order = topological_order(m_, edges_);
  if (!order) throw GraphError("edge list contains a directed cycle");
  order_ = std::move(*order);
}

bool Dag::has_edge(std::size_t from, std::size_t to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

std::vector<std::size_t> Dag::parents(std::size_t node) const {
  std::vector<std::size_t> out;
  for (const Edge& e : edges_)
    if (e.to == node) out.push_back(e.from);
  return out;
}

BoolMatrix Dag::adjacency() const {
  BoolMatrix a(m_, std::vector<bool>(m_, false));
  for (const Edge& e : edges_) a[e.from][e.to] = true;
  return a;
}

Cpdag::Cpdag(BoolMatrix adjacency) : adj_(std::move(adjacency)) {
  const std::size_t m = adj_.size();
  std::vector<Edge> directed;
  for (std::size_t i = 0; i < m; ++i) {
    if (adj_[i].size() != m) throw GraphError("cpdag adjacency must be square");
    if (adj_[i][i]) throw GraphError("cpdag adjacency has a nonzero diagonal");
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (adj_[i][j] && !adj_[j][i]) directed.push_back({i, j});
  if (!is_acyclic(m, directed)) throw GraphError("directed part of cpdag is cyclic");
}

void SemParameters::validate() const {
  const std::size_t m = omega.size();
  if (b.rows() != m || b.cols() != m) throw std::invalid_argument("SEM: B must be m x m with m = |omega|");
  for (std::size_t i = 0; i < m; ++i) {
    if (b(i, i) != 0.0) throw std::invalid_argument("SEM: B has a nonzero diagonal");
    if (!(omega[i] > 0.0) || !std::isfinite(omega[i])) throw std::invalid_argument("SEM: noise variances must be positive");
  }
  (void)support();  // throws on a cyclic support
}

Dag SemParameters::support() const {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      if (i != j && b(i, j) != 0.0) edges.push_back({i, j});
  return Dag(b.rows(), std::move(edges));
}

Dataset::Dataset(Matrix x) : x_(std::move(x)) {
  if (x_.rows() == 0 || x_.cols() == 0) throw std::invalid_argument("dataset must have n >= 1 and m >= 1");
  for (double v : x_.values())
    if (!std::isfinite(v)) throw std::invalid_argument("dataset contains a non-finite entry");
}

Dataset Dataset::standardized() const {
  Matrix y = x_;
  for (std::size_t j = 0; j < m(); ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n(); ++i) ss += x_(i, j) * x_(i, j);
    const double scale = ss > 0.0 ? std::sqrt(ss / static_cast<double>(n())) : 1.0;
    for (std::size_t i = 0; i < n(); ++i) y(i, j) = x_(i, j) / scale;
  }
  return Dataset(std::move(y));
}

SymmetricMatrix population_covariance(const SemParameters& params) {
  params.validate();
  const std::size_t m = params.m();
  // (I - B)^{-1} = I + B + B^2 + ... ; B is nilpotent on an acyclic support.
  Matrix w = Matrix::identity(m);
  Matrix power = Matrix::identity(m);
  for (std::size_t k = 0; k < m; ++k) {
    power = power * params.b;
    if (power.max_abs() == 0.0) break;
    w = w + power;
  }
  Matrix cov(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += w(k, i) * params.omega[k] * w(k, j);
      cov(i, j) = s;
    }
  return SymmetricMatrix(std::move(cov));
}

namespace {

void check_power_exponent(double p) {
  const bool lower = p >= 0.5 && p <= 0.8;
  const bool upper = p >= 1.2 && p <= 2.0;
  if (!lower && !upper)
    throw std::invalid_argument("power noise exponent must lie in [0.5,0.8] or [1.2,2.0], got " + std::to_string(p));
}

}  // namespace

Dataset generate_data(const SemParameters& params, std::size_t n, const NoiseSpec& noise, std::uint64_t seed) {
  params.validate();
  if (n == 0) throw std::invalid_argument("generate_data: n must be >= 1");
  std::optional<double> exponent;
  if (const auto* p = std::get_if<PowerNoise>(&noise)) {
    check_power_exponent(p->exponent);
    exponent = p->exponent;
  }
  const std::size_t m = params.m();
  Matrix x(n, m);
  for (std::size_t j = 0; j < m; ++j) {
    Rng rng = make_substream(seed, streams::kNoise, j);
    std::normal_distribution<double> normal(0.0, std::sqrt(params.omega[j]));
    for (std::size_t i = 0; i < n; ++i) {
      double e = normal(rng);
      if (exponent) e = std::copysign(std::pow(std::abs(e), *exponent), e);
      x(i, j) = e;
    }
  }
  const Dag dag = params.support();
  for (std::size_t j : dag.order()) {
    const auto parents = dag.parents(j);
    if (parents.empty()) continue;
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, j);
      for (std::size_t p : parents) s += params.b(p, j) * x(i, p);
      x(i, j) = s;
    }
  }
  return Dataset(std::move(x));
}

SemParameters random_sem(const Dag& dag, const std::vector<double>& weight_set, const VarianceSpec& variances,
                         std::uint64_t seed) {
  if (weight_set.empty()) throw std::invalid_argument("random_sem: weight set is empty");
  if (std::find(weight_set.begin(), weight_set.end(), 0.0) != weight_set.end())
    throw std::invalid_argument("random_sem: weight set must exclude 0");
  const std::size_t m = dag.m();
  SemParameters p{Matrix(m, m), Vector(m)};

  Rng wrng = make_substream(seed, streams::kWeights);
  std::uniform_int_distribution<std::size_t> pick_weight(0, weight_set.size() - 1);
  for (const Edge& e : dag.edges()) p.b(e.from, e.to) = weight_set[pick_weight(wrng)];

  Rng vrng = make_substream(seed, streams::kVariances);
  if (const auto* set = std::get_if<ValueSet>(&variances)) {
    if (set->values.empty()) throw std::invalid_argument("random_sem: variance set is empty");
    for (double v : set->values)
      if (!(v > 0.0)) throw std::invalid_argument("random_sem: variances must be positive");
    std::uniform_int_distribution<std::size_t> pick(0, set->values.size() - 1);
    for (std::size_t j = 0; j < m; ++j) p.omega[j] = set->values[pick(vrng)];
  } else {
    const auto& iv = std::get<Interval>(variances);
    if (!(iv.lo >= 0.0) || !(iv.hi > iv.lo))
      throw std::invalid_argument("random_sem: variance interval must satisfy 0 <= lo < hi");
    std::uniform_real_distribution<double> uni(iv.lo, iv.hi);
    for (std::size_t j = 0; j < m; ++j) {
      double v = uni(vrng);
      while (!(v > iv.lo && v < iv.hi)) v = uni(vrng);  // open interval keeps omega > 0
      p.omega[j] = v;
    }
  }
  p.validate();
  return p;
}

Dag random_dag(std::size_t m, std::size_t edges, std::uint64_t seed) {
  const std::size_t max_edges = m * (m - 1) / 2;
  if (edges > max_edges) throw std::invalid_argument("random_dag: too many edges for m");
  Rng rng = make_substream(seed, streams::kGraph);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Edge> forward;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) forward.push_back({perm[a], perm[b]});
  std::shuffle(forward.begin(), forward.end(), rng);
  forward.resize(edges);
  return Dag(m, std::move(forward));
}

SymmetricMatrix sample_covariance(const Dataset& data) { return kernels::sample_covariance(data, kernels::Exec::parallel); }

EdgeSet skeleton(const Dag& dag) {
  EdgeSet s(dag.m());
  for (const Edge& e : dag.edges()) s.insert_undirected(e.from, e.to);
  return s;
}

EdgeSet moral_graph(const Dag& dag) {
  EdgeSet s = skeleton(dag);
  for (std::size_t child = 0; child < dag.m(); ++child) {
    const auto parents = dag.parents(child);
    for (std::size_t a = 0; a < parents.size(); ++a)
      for (std::size_t b = a + 1; b < parents.size(); ++b) s.insert_undirected(parents[a], parents[b]);
  }
  return s;
}

}  // namespace micpdag
