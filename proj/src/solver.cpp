#include "micpdag/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "micpdag/io.hpp"
#include "micpdag/kernels.hpp"
#include "micpdag/subset_bound.hpp"

namespace micpdag {

GammaMatrix rescale_to_trace(const GammaMatrix& gamma, const SymmetricMatrix& s) {
  const std::size_t m = gamma.m();
  if (s.dim() != m) throw std::invalid_argument("rescale_to_trace: dimension mismatch");
  Matrix out = gamma.matrix();
  Vector col(m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) col[i] = out(i, k);
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (col[i] == 0.0) continue;
      double si = 0.0;
      for (std::size_t j = 0; j < m; ++j) si += s(i, j) * col[j];
      d += col[i] * si;
    }
    if (!(d > 1e-14)) throw DegenerateColumn(k);
    const double scale = 1.0 / std::sqrt(d);
    for (std::size_t i = 0; i < m; ++i) out(i, k) *= scale;
  }
  return GammaMatrix(std::move(out));
}

double gap_target(GapMode mode, double lambda_sq, std::size_t m, double tau, double c) {
  if (m == 0) throw std::invalid_argument("gap_target: m must be >= 1");
  const double mm = static_cast<double>(m);
  switch (mode) {
    case GapMode::exact:
      return 0.0;
    case GapMode::theorem1:
      return lambda_sq * mm * (mm - 1.0) / 4.0;
    case GapMode::theorem2:
      return c * lambda_sq;
    case GapMode::custom:
      if (!(tau >= 0.0)) throw std::invalid_argument("gap_target: custom tau must be >= 0");
      return tau;
  }
  return 0.0;
}

GapMode parse_gap_mode(const std::string& name) {
  if (name == "exact") return GapMode::exact;
  if (name == "theorem1") return GapMode::theorem1;
  if (name == "theorem2") return GapMode::theorem2;
  if (name == "custom") return GapMode::custom;
  throw std::invalid_argument("unknown gap mode '" + name + "' (exact|theorem1|theorem2|custom)");
}

void SolveConfig::validate() const {
  if (!(gap_target >= 0.0)) throw std::invalid_argument("solve config: gap_target must be >= 0");
  if (!(node_relax_tol > 0.0)) throw std::invalid_argument("solve config: node_relax_tol must be > 0");
  if (!(cut_tol > 0.0)) throw std::invalid_argument("solve config: cut_tol must be > 0");
}

double SolveConfig::effective_time_limit(std::size_t m) const {
  return time_limit_secs > 0.0 ? time_limit_secs : 50.0 * static_cast<double>(m);
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "Optimal";
    case SolveStatus::gap_reached:
      return "GapReached";
    case SolveStatus::time_limit:
      return "TimeLimit";
  }
  return "?";
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const SolveReport& r, const MicpProblem& p) {
  nlohmann::json g = nlohmann::json::array();
  for (std::size_t q = 0; q < p.pairs().size(); ++q)
    if (r.g[q] > 0.5) g.push_back({p.pairs()[q].from, p.pairs()[q].to});
  return {{"status", to_string(r.status)},
          {"upper_bound", finite_or_null(r.upper_bound)},
          {"lower_bound", finite_or_null(r.lower_bound)},
          {"gap", finite_or_null(r.gap)},
          {"rgap", finite_or_null(r.rgap)},
          {"nodes_explored", r.nodes_explored},
          {"oa_cuts_added", r.oa_cuts_added},
          {"wall_secs", r.wall_secs},
          {"lambda_sq", p.lambda_sq()},
          {"big_m", p.big_m()},
          {"gamma", io::to_json(r.incumbent.matrix())},
          {"edges", io::edges_to_json(r.dag().edges())},
          {"g_active_pairs", g}};
}

std::string events_csv(const SolveReport& r) {
  std::ostringstream out;
  out << "wall,upper_bound,lower_bound,node\n" << std::setprecision(17);
  for (const BoundEvent& e : r.events) out << e.wall << ',' << e.upper_bound << ',' << e.lower_bound << ',' << e.node << '\n';
  return out.str();
}

Dag greedy_initial_dag(const MicpProblem& p) {
  const std::size_t m = p.m();
  std::vector<char> remaining(m, 1);
  std::vector<Edge> edges;
  for (std::size_t step = 0; step < m; ++step) {
    std::size_t best = m;
    double best_c = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_parents;
    for (std::size_t j = 0; j < m; ++j) {
      if (!remaining[j]) continue;
      std::vector<std::size_t> parents;
      for (std::size_t i : p.e_super().sources_into(j))
        if (remaining[i]) parents.push_back(i);
      double c;
      try {
        c = fit_column(p.s(), j, parents).conditional_variance;
      } catch (const SingularParentBlock&) {
        c = fit_column(p.s(), j, parents, 1e-8).conditional_variance;
      }
      if (best == m || c < best_c) {
        best = j;
        best_c = c;
        best_parents = std::move(parents);
      }
    }
    for (std::size_t i : best_parents) edges.push_back({i, best});
    remaining[best] = 0;
  }
  return Dag(m, std::move(edges));
}

namespace {

using Clock = std::chrono::steady_clock;

// Edges of one directed cycle, or empty when acyclic.
std::vector<Edge> find_cycle(std::size_t m, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> out(m);
  for (const Edge& e : edges) out[e.from].push_back(e.to);
  std::vector<int> color(m, 0);
  std::vector<std::size_t> parent(m, m);
  for (std::size_t s = 0; s < m; ++s) {
    if (color[s]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
    color[s] = 1;
    while (!stack.empty()) {
      auto& [u, idx] = stack.back();
      if (idx == out[u].size()) {
        color[u] = 2;
        stack.pop_back();
        continue;
      }
      const std::size_t v = out[u][idx++];
      if (color[v] == 1) {
        std::vector<Edge> cyc{{u, v}};
        for (std::size_t w = u; w != v; w = parent[w]) cyc.push_back({parent[w], w});
        return cyc;
      }
      if (color[v] == 0) {
        color[v] = 1;
        parent[v] = u;
        stack.push_back({v, 0});
      }
    }
  }
  return {};
}

bool reaches(const std::vector<std::vector<std::size_t>>& out, std::size_t from, std::size_t to) {
  std::vector<char> seen(out.size(), 0);
  std::vector<std::size_t> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    if (u == to) return true;
    for (std::size_t v : out[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
  return false;
}

class Search {
 public:
  Search(const MicpProblem& p, const SolveConfig& cfg) : p_(p), cfg_(cfg), pool_(p.m()) {
    relax_.tol = cfg.node_relax_tol;
    relax_.exec = cfg.deterministic ? kernels::Exec::serial : kernels::Exec::parallel;
    time_limit_ = cfg.effective_time_limit(p.m());
    if (cfg.subset_bounds) {
      subset_.emplace(p, cfg.max_subset_degree);
      if (!subset_->enabled()) {
        spdlog::info("subset bound disabled: a column has more than {} superstructure sources", cfg.max_subset_degree);
        subset_.reset();
      }
    }
  }

  SolveReport run() {
    start_ = Clock::now();
    const std::size_t m = p_.m();
    try_incumbent(greedy_initial_dag(p_).edges(), 0);
    if (!have_incumbent_) throw std::runtime_error("branch_and_bound: no feasible initial incumbent");
    for (std::size_t i = 0; i < m; ++i) {
      add_cut(i, std::clamp(incumbent_(i, i), kDiagonalFloor, p_.big_m()));
      add_cut(i, std::clamp(1.0, kDiagonalFloor, p_.big_m()));
    }

    BnbNode root = root_node(p_);
    push(std::move(root));
    SolveStatus status = SolveStatus::optimal;
    while (!open_.empty()) {
      if (elapsed() > time_limit_ || (cfg_.node_limit && explored_ >= cfg_.node_limit)) {
        status = SolveStatus::time_limit;
        break;
      }
      auto it = open_.begin();
      if (plunge_) {
        auto nit = nodes_.find(*plunge_);
        if (nit != nodes_.end()) it = open_.find({nit->second.parent_bound, *plunge_});
        plunge_.reset();
      }
      const std::uint64_t id = it->second;
      open_.erase(it);
      BnbNode node = std::move(nodes_.at(id));
      nodes_.erase(id);
      if (!prunable(node.parent_bound)) process(node);
      update_lower_bound(node.id);
      if (ub_ - lb_ <= cfg_.gap_target) {
        status = cfg_.gap_target > 0.0 ? SolveStatus::gap_reached : SolveStatus::optimal;
        if (!open_.empty()) break;
      }
    }
    if (open_.empty()) {
      status = SolveStatus::optimal;
      update_lower_bound(events_.empty() ? 0 : events_.back().node);
    }

    SolveReport r;
    r.incumbent = incumbent_;
    r.g = incumbent_g_;
    r.upper_bound = ub_;
    r.lower_bound = lb_;
    r.gap = ub_ - lb_;
    if (lb_ != 0.0 && std::isfinite(lb_))
      r.rgap = r.gap / std::abs(lb_);
    else
      r.rgap = r.gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.nodes_explored = explored_;
    r.oa_cuts_added = cuts_added_;
    r.wall_secs = elapsed();
    r.status = status;
    r.events = std::move(events_);
    return r;
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  double prune_tol() const { return 1e-7 * std::max(1.0, std::abs(ub_)); }
  bool prunable(double bound) const { return bound >= ub_ - prune_tol(); }

  void add_cut(std::size_t node, double anchor) {
    if (pool_.add(oa_cut_at(node, anchor, kDiagonalFloor))) ++cuts_added_;
  }

  void push(BnbNode node) {
    node.id = next_id_++;
    open_.insert({node.parent_bound, node.id});
    const std::uint64_t id = node.id;
    nodes_.emplace(id, std::move(node));
  }

  void record(std::uint64_t node) {
    events_.push_back({elapsed(), ub_, lb_, node});
  }

  void update_lower_bound(std::uint64_t node) {
    double lb = std::min(ub_, closed_min_);
    if (!open_.empty()) lb = std::min(lb, open_.begin()->first);
    const double next = std::min(std::max(lb_, lb), ub_);
    if (next != lb_) {
      lb_ = next;
      record(node);
    }
  }

  RelaxResult relax(const BnbNode& node, bool exact = false) {
    RelaxOptions o = relax_;
    o.exact_log = exact;
    return solve_node_relaxation(p_, node, pool_, o);
  }

  // Algorithm 1 inner loop: cut at the current diagonals until every T_j
  // matches -2 log Gamma_jj within cut_tol.
  RelaxResult oa_loop(const BnbNode& node, RelaxResult res) {
    BnbNode w = node;
    for (int round = 0; round < 1000 && res.status != RelaxStatus::infeasible; ++round) {
      bool added = false;
      for (std::size_t k = 0; k < p_.m(); ++k) {
        const double x = res.point.gamma(k, k);
        if (res.point.t[k] < -2.0 * std::log(x) - cfg_.cut_tol && pool_.add(oa_cut_at(k, x, kDiagonalFloor))) {
          ++cuts_added_;
          added = true;
        }
      }
      if (!added) break;
      w.warm = std::make_shared<const Matrix>(res.point.gamma);
      res = relax(w);
    }
    return res;
  }

  bool within_big_m(const GammaMatrix& g) const {
    const double bm = p_.big_m() * (1.0 + 1e-12);
    for (std::size_t i = 0; i < g.m(); ++i) {
      if (g(i, i) < kDiagonalFloor) return false;
      for (std::size_t j = 0; j < g.m(); ++j)
        if (std::abs(g(i, j)) > bm) return false;
    }
    return true;
  }

  double column_score(std::size_t k, std::vector<std::size_t> parents) {
    std::sort(parents.begin(), parents.end());
    auto key = std::make_pair(k, parents);
    if (auto it = column_scores_.find(key); it != column_scores_.end()) return it->second;
    double v = std::numeric_limits<double>::infinity();
    try {
      v = 1.0 + std::log(fit_column(p_.s(), k, parents).conditional_variance) +
          p_.lambda_sq() * static_cast<double>(parents.size());
    } catch (const SingularParentBlock&) {
    } catch (const DegenerateColumn&) {
    }
    column_scores_.emplace(std::move(key), v);
    return v;
  }

  // Best-improvement hill climbing over single edge additions, deletions and
  // reversals inside the superstructure, on closed-form column scores.
  std::vector<Edge> polish(std::vector<Edge> edges) {
    const std::size_t m = p_.m();
    std::vector<std::vector<std::size_t>> parents(m);
    for (const Edge& e : edges) parents[e.to].push_back(e.from);
    std::vector<double> score(m);
    for (std::size_t k = 0; k < m; ++k) score[k] = column_score(k, parents[k]);
    auto without = [](std::vector<std::size_t> v, std::size_t x) {
      v.erase(std::find(v.begin(), v.end(), x));
      return v;
    };
    auto with = [](std::vector<std::size_t> v, std::size_t x) {
      v.push_back(x);
      return v;
    };
    for (int pass = 0; pass < 10 * static_cast<int>(m * m); ++pass) {
      std::vector<std::vector<std::size_t>> out(m);
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i : parents[k]) out[i].push_back(k);
      double best = -1e-10;
      int kind = -1;
      Edge move{};
      double s_to = 0.0, s_from = 0.0;
      for (const Edge& e : p_.pairs()) {
        const auto& pk = parents[e.to];
        const bool present = std::find(pk.begin(), pk.end(), e.from) != pk.end();
        if (present) {
          const double d = column_score(e.to, without(pk, e.from));
          if (d - score[e.to] < best) {
            best = d - score[e.to];
            kind = 0;
            move = e;
            s_to = d;
          }
          if (!p_.pair_index(e.to, e.from)) continue;
          // Reversal: drop e, then e.from -> e.to must not be reachable otherwise.
          auto& o = out[e.from];
          o.erase(std::find(o.begin(), o.end(), e.to));
          const bool ok = !reaches(out, e.from, e.to);
          o.push_back(e.to);
          if (!ok) continue;
          const double a = column_score(e.from, with(parents[e.from], e.to));
          if (d + a - score[e.to] - score[e.from] < best) {
            best = d + a - score[e.to] - score[e.from];
            kind = 2;
            move = e;
            s_to = d;
            s_from = a;
          }
        } else {
          const auto& rev = parents[e.from];
          if (std::find(rev.begin(), rev.end(), e.to) != rev.end()) continue;
          if (reaches(out, e.to, e.from)) continue;
          const double a = column_score(e.to, with(pk, e.from));
          if (a - score[e.to] < best) {
            best = a - score[e.to];
            kind = 1;
            move = e;
            s_to = a;
          }
        }
      }
      if (kind < 0) break;
      if (kind == 1) {
        parents[move.to].push_back(move.from);
      } else {
        parents[move.to] = without(parents[move.to], move.from);
        if (kind == 2) {
          parents[move.from].push_back(move.to);
          score[move.from] = s_from;
        }
      }
      score[move.to] = s_to;
    }
    std::vector<Edge> result;
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i : parents[k]) result.push_back({i, k});
    return subset_ ? reorder(result) : result;
  }

  // Insertion search over topological orders, each scored by the best parent
  // set of every node among its predecessors.
  std::vector<Edge> reorder(const std::vector<Edge>& edges) {
    const std::size_t m = p_.m();
    std::vector<std::size_t> order = *topological_order(m, edges);
    auto total = [&](const std::vector<std::size_t>& ord) {
      std::vector<char> allowed(m, 0);
      double sum = 0.0;
      for (std::size_t k : ord) {
        sum += subset_->best_parents(k, allowed).second;
        allowed[k] = 1;
      }
      return sum;
    };
    double current = total(order);
    for (bool improved = true; improved;) {
      improved = false;
      for (std::size_t i = 0; i < m && !improved; ++i)
        for (std::size_t j = 0; j < m && !improved; ++j) {
          if (i == j) continue;
          std::vector<std::size_t> trial = order;
          const std::size_t v = trial[i];
          trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
          trial.insert(trial.begin() + static_cast<std::ptrdiff_t>(j), v);
          const double t = total(trial);
          if (t < current - 1e-10) {
            current = t;
            order = std::move(trial);
            improved = true;
          }
        }
    }
    std::vector<char> allowed(m, 0);
    std::vector<Edge> result;
    for (std::size_t k : order) {
      for (std::size_t i : subset_->best_parents(k, allowed).first) result.push_back({i, k});
      allowed[k] = 1;
    }
    return result;
  }

  static constexpr std::size_t kTriedCacheSize = 50000;
  static constexpr std::size_t kWarmOpenCap = 50000;

  struct Candidate {
    double objective = std::numeric_limits<double>::infinity();
    bool boxed = false;  // the closed-form fit violated big-M
  };

  // Candidates from node heuristics that improve the incumbent are polished
  // before they are accepted.
  Candidate try_incumbent(std::vector<Edge> edges, std::uint64_t node, bool polish_improving = false) {
    std::sort(edges.begin(), edges.end());
    if (auto it = tried_.find(edges); it != tried_.end()) return it->second;
    if (tried_.size() >= kTriedCacheSize) tried_.clear();
    Candidate cand;
    tried_.emplace(edges, cand);
    const std::size_t m = p_.m();
    GammaMatrix gam;
    try {
      const Dag dag(m, edges);
      gam = rescale_to_trace(dag_mle(p_.s(), dag, p_.lambda_sq()).gamma, p_.s());
      if (!within_big_m(gam)) {
        spdlog::warn("incumbent candidate violates |Gamma| <= M = {:.4g}; solving the box-constrained fit", p_.big_m());
        cand.boxed = true;
        BnbNode leaf = root_node(p_);
        for (std::size_t q = 0; q < p_.pairs().size(); ++q)
          leaf.fixed[q] = dag.has_edge(p_.pairs()[q].from, p_.pairs()[q].to) ? 1 : 0;
        const RelaxResult r = relax(leaf, true);
        if (r.status == RelaxStatus::infeasible) return tried_[edges] = cand;
        gam = GammaMatrix(r.point.gamma);
      }
    } catch (const SingularParentBlock&) {
      return tried_[edges] = cand;
    } catch (const DegenerateColumn&) {
      return tried_[edges] = cand;
    }
    cand.objective = objective(gam, p_.s(), p_.lambda_sq());
    tried_[edges] = cand;
    if (have_incumbent_ && !(cand.objective < ub_)) return cand;
    if (polish_improving && cfg_.polish_incumbents) {
      auto better = polish(edges);
      std::sort(better.begin(), better.end());
      if (better != edges) try_incumbent(std::move(better), node);
      if (cand.objective >= ub_) return cand;
    }
    have_incumbent_ = true;
    ub_ = cand.objective;
    incumbent_ = std::move(gam);
    incumbent_g_.assign(p_.pairs().size(), 0.0);
    for (std::size_t q = 0; q < p_.pairs().size(); ++q)
      if (incumbent_(p_.pairs()[q].from, p_.pairs()[q].to) != 0.0) incumbent_g_[q] = 1.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (std::abs(incumbent_(i, j)) >= 0.99 * p_.big_m())
          spdlog::warn("incumbent entry Gamma({},{}) = {:.4g} is within 1% of the big-M bound", i, j, incumbent_(i, j));
    record(node);
    return cand;
  }

  // Greedy acyclic subset of `edges`, keeping fixed-to-1 pairs first and the
  // rest in the given priority order.
  std::vector<Edge> repair(const std::vector<signed char>& fixed, const std::vector<Edge>& ordered) {
    const std::size_t m = p_.m();
    const auto& pairs = p_.pairs();
    std::vector<std::vector<std::size_t>> out(m);
    std::vector<Edge> edges;
    for (std::size_t q = 0; q < pairs.size(); ++q)
      if (fixed[q] == 1) {
        out[pairs[q].from].push_back(pairs[q].to);
        edges.push_back(pairs[q]);
      }
    for (const Edge& e : ordered) {
      const std::size_t q = *p_.pair_index(e.from, e.to);
      if (fixed[q] != kFree || reaches(out, e.to, e.from)) continue;
      out[e.from].push_back(e.to);
      edges.push_back(e);
    }
    return edges;
  }

  void rounding(const RelaxResult& res, std::uint64_t node) {
    std::vector<std::size_t> cand;
    for (std::size_t q = 0; q < p_.pairs().size(); ++q)
      if (res.fixed[q] == kFree && res.point.g[q] >= 0.5) cand.push_back(q);
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return res.point.g[a] > res.point.g[b]; });
    std::vector<Edge> ordered;
    for (std::size_t q : cand) ordered.push_back(p_.pairs()[q]);
    try_incumbent(repair(res.fixed, ordered), node, true);
  }

  static std::vector<Edge> active_edges(const MicpProblem& p, const Vector& g) {
    std::vector<Edge> e;
    for (std::size_t q = 0; q < p.pairs().size(); ++q)
      if (g[q] > 0.5) e.push_back(p.pairs()[q]);
    return e;
  }

  struct Branch {
    std::size_t pair;
    signed char plunge;
  };

  // Branching on a conflict of the subset solution: the 2-cycle whose cheaper
  // direction is the most expensive to drop, else the cheapest edge of a
  // longer cycle.
  std::optional<Branch> subset_branch(const SubsetBound::Result& sr, const std::vector<signed char>& fixed) {
    std::optional<Branch> pick;
    double best = -1.0;
    for (const Edge& e : sr.edges) {
      if (e.from > e.to || !std::binary_search(sr.edges.begin(), sr.edges.end(), Edge{e.to, e.from})) continue;
      const double fwd = subset_->removal_cost(sr, fixed, e.from, e.to);
      const double bwd = subset_->removal_cost(sr, fixed, e.to, e.from);
      const double score = std::min(fwd, bwd);
      if (score > best) {
        best = score;
        const Edge keep = fwd >= bwd ? e : Edge{e.to, e.from};
        pick = Branch{*p_.pair_index(keep.from, keep.to), 1};
      }
    }
    if (pick) return pick;
    double cheapest = std::numeric_limits<double>::infinity();
    for (const Edge& e : find_cycle(p_.m(), sr.edges)) {
      const std::size_t q = *p_.pair_index(e.from, e.to);
      if (fixed[q] != kFree) continue;
      const double c = subset_->removal_cost(sr, fixed, e.from, e.to);
      if (!pick || c < cheapest || (c == cheapest && q < pick->pair)) {
        cheapest = c;
        pick = Branch{q, 0};
      }
    }
    return pick;
  }

  // Most fractional g, ties by larger |Gamma| then pair order; for an
  // integral point with a cycle, the free cycle edge with the smallest |Gamma|.
  std::optional<Branch> relaxation_branch(const RelaxResult& res) {
    const auto& pairs = p_.pairs();
    const Vector& g = res.point.g;
    auto abs_gamma = [&](std::size_t q) { return std::abs(res.point.gamma(pairs[q].from, pairs[q].to)); };
    std::optional<std::size_t> pick;
    double best_frac = 1e-6;
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      if (res.fixed[q] != kFree) continue;
      const double frac = std::min(g[q], 1.0 - g[q]);
      if (frac <= 1e-6) continue;
      if (!pick || frac > best_frac + 1e-12 || (std::abs(frac - best_frac) <= 1e-12 && abs_gamma(q) > abs_gamma(*pick))) {
        pick = q;
        best_frac = frac;
      }
    }
    if (pick) return Branch{*pick, static_cast<signed char>(g[*pick] >= 0.5 ? 1 : 0)};
    for (const Edge& e : find_cycle(p_.m(), active_edges(p_, g))) {
      const std::size_t q = *p_.pair_index(e.from, e.to);
      if (res.fixed[q] != kFree) continue;
      if (!pick || abs_gamma(q) < abs_gamma(*pick) || (abs_gamma(q) == abs_gamma(*pick) && q < *pick)) pick = q;
    }
    if (pick) return Branch{*pick, 0};
    return std::nullopt;
  }

  // With a positive gap target the search stops as soon as a node bound
  // certifies it; the node goes back to the open list with that bound.
  bool defer_if_certified(const BnbNode& node, double bound, const std::shared_ptr<const Multipliers>& mu) {
    if (cfg_.gap_target <= 0.0) return false;
    double lb = std::min(bound, closed_min_);
    if (!open_.empty()) lb = std::min(lb, open_.begin()->first);
    if (ub_ - lb > cfg_.gap_target) return false;
    BnbNode again = node;
    again.parent_bound = bound;
    again.mu = mu;
    push(std::move(again));
    return true;
  }

  void process(const BnbNode& node) {
    ++explored_;
    const auto fixed = propagate_fixings(p_, node.fixed);
    if (!fixed) return;
    double bound = node.parent_bound;

    std::optional<SubsetBound::Result> sr;
    std::shared_ptr<const Multipliers> mu = node.mu;
    if (subset_) {
      sr = subset_->evaluate(*fixed, node.mu ? *node.mu : Multipliers{}, ub_, cfg_.lagrange_iterations);
      bound = std::max(bound, sr->bound);
      mu = std::make_shared<const Multipliers>(sr->mu);
      if (defer_if_certified(node, bound, mu)) return;
      if (cfg_.rounding_heuristic || sr->acyclic) {
        const Candidate c = try_incumbent(repair(*fixed, sr->edges), node.id, true);
        // An acyclic subset solution with complementary slack multipliers
        // is optimal for the node up to the big-M bounds.
        if (sr->acyclic && !c.boxed && sr->slack <= cfg_.node_relax_tol &&
            c.objective <= sr->bound + sr->slack + cfg_.node_relax_tol) {
          closed_min_ = std::min(closed_min_, bound);
          return;
        }
      }
      if (prunable(bound)) return;
      if (cfg_.skip_relaxation_at_cyclic && node.id != 0 && !sr->acyclic) {
        if (auto br = subset_branch(*sr, *fixed)) {
          std::optional<std::uint64_t> plunge_id;
          for (int v = 0; v <= 1; ++v) {
            BnbNode child;
            child.fixed = *fixed;
            child.fixed[br->pair] = static_cast<signed char>(v);
            child.depth = node.depth + 1;
            child.parent_bound = bound;
            child.warm = node.warm;
            child.mu = mu;
            push(std::move(child));
            if (v == br->plunge) plunge_id = next_id_ - 1;
          }
          plunge_ = plunge_id;
          return;
        }
      }
    }

    RelaxResult res = relax(node);
    if (res.status == RelaxStatus::infeasible) return;
    if (node.id == 0 || cfg_.fractional_cuts) res = oa_loop(node, res);
    bound = std::max(bound, res.lower_bound);
    if (defer_if_certified(node, bound, mu)) return;
    if (cfg_.rounding_heuristic) rounding(res, node.id);
    if (prunable(bound)) return;

    if (is_integral(res.point.g)) {
      res = oa_loop(node, res);
      bound = std::max(bound, res.lower_bound);
      if (prunable(bound)) return;
      if (is_integral(res.point.g)) {
        const auto support = active_edges(p_, res.point.g);
        if (is_acyclic(p_.m(), support)) {
          try_incumbent(support, node.id);
          BnbNode w = node;
          w.warm = std::make_shared<const Matrix>(res.point.gamma);
          res = relax(w, true);
          bound = std::max(bound, res.lower_bound);
          if (prunable(bound)) return;
          const auto exact_support = active_edges(p_, res.point.g);
          if (is_integral(res.point.g) && is_acyclic(p_.m(), exact_support)) {
            try_incumbent(exact_support, node.id);
            closed_min_ = std::min(closed_min_, bound);
            return;
          }
        }
      }
    }

    std::optional<Branch> br;
    if (sr && !sr->acyclic) br = subset_branch(*sr, res.fixed);
    if (!br) br = relaxation_branch(res);
    if (!br) {
      // Integral and acyclic without an improving split; keep its bound.
      closed_min_ = std::min(closed_min_, bound);
      return;
    }
    std::optional<std::uint64_t> plunge_id;
    // Only the plunge child, processed next, gets this node's point as its
    // warm start; the sibling keeps the inherited one, which bounds memory.
    // Once the open list is large, no new warm starts are stored at all.
    const auto warm = open_.size() < kWarmOpenCap ? std::make_shared<const Matrix>(res.point.gamma) : node.warm;
    for (int v = 0; v <= 1; ++v) {
      BnbNode child;
      child.fixed = res.fixed;
      child.fixed[br->pair] = static_cast<signed char>(v);
      child.depth = node.depth + 1;
      child.parent_bound = bound;
      child.warm = v == br->plunge ? warm : node.warm;
      child.mu = mu;
      push(std::move(child));
      if (v == br->plunge) plunge_id = next_id_ - 1;
    }
    plunge_ = plunge_id;
  }

  const MicpProblem& p_;
  SolveConfig cfg_;
  CutPool pool_;
  RelaxOptions relax_;
  double time_limit_ = 0.0;
  Clock::time_point start_;

  bool have_incumbent_ = false;
  GammaMatrix incumbent_;
  Vector incumbent_g_;
  double ub_ = std::numeric_limits<double>::infinity();
  double lb_ = -std::numeric_limits<double>::infinity();
  double closed_min_ = std::numeric_limits<double>::infinity();

  std::set<std::pair<double, std::uint64_t>> open_;
  std::map<std::uint64_t, BnbNode> nodes_;
  std::optional<std::uint64_t> plunge_;
  std::uint64_t next_id_ = 0;
  std::uint64_t explored_ = 0;
  std::size_t cuts_added_ = 0;
  std::vector<BoundEvent> events_;
  std::map<std::vector<Edge>, Candidate> tried_;
  std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> column_scores_;
  std::optional<SubsetBound> subset_;
};

}  // namespace

SolveReport branch_and_bound(const MicpProblem& p, const SolveConfig& cfg) {
  cfg.validate();
  if (cfg.worker_count > 0) kernels::set_worker_count(cfg.worker_count);
  Search search(p, cfg);
  return search.run();
}

}  // namespace micpdag
