#include "micpdag/evaluation.hpp"

#include <algorithm>
#include <string>

namespace micpdag {

namespace {

void require_same_m(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionMismatch("graphs have " + std::to_string(a) + " and " + std::to_string(b) + " nodes");
}

class Pdag {
 public:
  explicit Pdag(std::size_t m) : a_(m, std::vector<bool>(m, false)) {}
  std::size_t m() const { return a_.size(); }
  bool adj(std::size_t i, std::size_t j) const { return a_[i][j] || a_[j][i]; }
  bool dir(std::size_t i, std::size_t j) const { return a_[i][j] && !a_[j][i]; }
  bool und(std::size_t i, std::size_t j) const { return a_[i][j] && a_[j][i]; }
  void link(std::size_t i, std::size_t j) { a_[i][j] = a_[j][i] = true; }
  void orient(std::size_t i, std::size_t j) { a_[j][i] = false; }
  BoolMatrix take() { return std::move(a_); }

 private:
  BoolMatrix a_;
};

// One pass of Meek's rules; returns true when an edge was oriented.
bool meek_pass(Pdag& g) {
  const std::size_t m = g.m();
  bool changed = false;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b || !g.und(a, b)) continue;
      bool orient = false;
      for (std::size_t c = 0; c < m && !orient; ++c) {
        if (c == a || c == b) continue;
        // R1: c -> a - b, c and b non-adjacent
        if (g.dir(c, a) && !g.adj(c, b)) orient = true;
        // R2: a -> c -> b
        if (g.dir(a, c) && g.dir(c, b)) orient = true;
      }
      // R3: a - c -> b, a - d -> b, c and d non-adjacent
      for (std::size_t c = 0; c < m && !orient; ++c) {
        if (c == a || c == b || !g.und(a, c) || !g.dir(c, b)) continue;
        for (std::size_t d = c + 1; d < m && !orient; ++d)
          if (d != a && d != b && g.und(a, d) && g.dir(d, b) && !g.adj(c, d)) orient = true;
      }
      // R4: a - c -> d -> b, a adjacent to d, c and b non-adjacent
      for (std::size_t c = 0; c < m && !orient; ++c) {
        if (c == a || c == b || !g.und(a, c) || g.adj(c, b)) continue;
        for (std::size_t d = 0; d < m && !orient; ++d)
          if (d != a && d != b && d != c && g.dir(c, d) && g.dir(d, b) && g.adj(a, d)) orient = true;
      }
      if (orient) {
        g.orient(a, b);
        changed = true;
      }
    }
  return changed;
}

}  // namespace

std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> v_structures(const Dag& dag) {
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < dag.m(); ++k) {
    const auto pa = dag.parents(k);
    for (std::size_t x = 0; x < pa.size(); ++x)
      for (std::size_t y = x + 1; y < pa.size(); ++y)
        if (!dag.adjacent(pa[x], pa[y])) out.emplace_back(std::min(pa[x], pa[y]), k, std::max(pa[x], pa[y]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Cpdag dag_to_cpdag(const Dag& dag) {
  Pdag g(dag.m());
  for (const Edge& e : dag.edges()) g.link(e.from, e.to);
  for (const auto& [i, k, j] : v_structures(dag)) {
    g.orient(i, k);
    g.orient(j, k);
  }
  while (meek_pass(g)) {
  }
  return Cpdag(g.take());
}

bool mec_equal(const Dag& a, const Dag& b) {
  require_same_m(a.m(), b.m());
  return skeleton(a) == skeleton(b) && v_structures(a) == v_structures(b);
}

std::size_t d_cpdag(const Cpdag& a, const Cpdag& b) {
  require_same_m(a.m(), b.m());
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.m(); ++i)
    for (std::size_t j = 0; j < a.m(); ++j)
      if (a(i, j) != b(i, j)) ++d;
  return d;
}

double scaled_d_cpdag(std::size_t d, std::size_t true_edges) {
  return true_edges == 0 ? static_cast<double>(d) : static_cast<double>(d) / static_cast<double>(true_edges);
}

SkeletonMetrics skeleton_metrics(const Dag& truth, const Dag& est) {
  require_same_m(truth.m(), est.m());
  const std::size_t m = truth.m();
  std::size_t t = 0, e = 0, both = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const bool a = truth.adjacent(i, j);
      const bool b = est.adjacent(i, j);
      t += a;
      e += b;
      both += a && b;
    }
  const std::size_t all = m * (m - 1) / 2;
  SkeletonMetrics r;
  r.shd = (t - both) + (e - both);
  r.tpr = t == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(t);
  r.fpr = all == t ? 0.0 : static_cast<double>(e - both) / static_cast<double>(all - t);
  return r;
}

}  // namespace micpdag
