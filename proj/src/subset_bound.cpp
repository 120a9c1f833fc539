#include "micpdag/subset_bound.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "micpdag/relaxation.hpp"
#include "micpdag/scoring.hpp"

namespace micpdag {

SubsetBound::SubsetBound(const MicpProblem& p, std::size_t max_degree, std::size_t max_rows)
    : p_(p), max_rows_(max_rows), sources_(p.m()), pair_of_(p.m()), bit_of_(p.pairs().size()), score_(p.m()) {
  const std::size_t m = p.m();
  for (std::size_t k = 0; k < m; ++k)
    if (p.column_pairs(k).size() > std::min<std::size_t>(max_degree, 30)) return;

  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t q : p.column_pairs(k)) {
      bit_of_[q] = pair_of_[k].size();
      pair_of_[k].push_back(q);
      sources_[k].push_back(p.pairs()[q].from);
    }
    const std::size_t d = sources_[k].size();
    score_[k].resize(std::size_t{1} << d);
    std::vector<std::size_t> parents;
    for (std::uint32_t mask = 0; mask < score_[k].size(); ++mask) {
      parents.clear();
      for (std::size_t a = 0; a < d; ++a)
        if (mask >> a & 1u) parents.push_back(sources_[k][a]);
      double v;
      try {
        v = 1.0 + std::log(fit_column(p.s(), k, parents).conditional_variance) +
            p.lambda_sq() * static_cast<double>(parents.size());
      } catch (const SingularParentBlock&) {
        v = std::numeric_limits<double>::infinity();
      }
      score_[k][mask] = v;
    }
  }
  enabled_ = true;
}

void SubsetBound::masks_for(std::size_t k, const std::vector<signed char>& fixed, std::uint32_t& ones,
                            std::uint32_t& zeros) const {
  ones = zeros = 0;
  for (std::size_t a = 0; a < pair_of_[k].size(); ++a) {
    const signed char f = fixed[pair_of_[k][a]];
    if (f == 1) ones |= 1u << a;
    if (f == 0) zeros |= 1u << a;
  }
}

SubsetBound::ColumnPick SubsetBound::best_mask(std::size_t k, std::uint32_t ones, std::uint32_t zeros,
                                               const Vector& cost) const {
  // Cost of every mask from the mask without its lowest bit.
  const std::size_t count = score_[k].size();
  scratch_.resize(count);
  scratch_[0] = 0.0;
  ColumnPick best{0, std::numeric_limits<double>::infinity()};
  if (ones == 0) best = {0, score_[k][0]};
  for (std::uint32_t mask = 1; mask < count; ++mask) {
    const int low = std::countr_zero(mask);
    scratch_[mask] = scratch_[mask & (mask - 1)] + cost[pair_of_[k][static_cast<std::size_t>(low)]];
    if ((mask & zeros) || (mask & ones) != ones) continue;
    const double v = score_[k][mask] + scratch_[mask];
    if (v < best.value) best = {mask, v};
  }
  return best;
}

bool SubsetBound::chosen(const std::vector<std::uint32_t>& choice, std::size_t q) const {
  return (choice[p_.pairs()[q].to] >> bit_of_[q] & 1u) != 0;
}

std::vector<std::size_t> SubsetBound::separate(const std::vector<std::uint32_t>& choice) {
  const std::size_t m = p_.m();
  std::vector<std::vector<std::size_t>> out(m);  // chosen pair indices leaving each node
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < pair_of_[k].size(); ++a)
      if (choice[k] >> a & 1u) out[sources_[k][a]].push_back(pair_of_[k][a]);
  std::vector<std::size_t> found_rows;
  std::vector<std::size_t> via(m);
  std::vector<char> seen(m);
  std::vector<std::size_t> queue;
  for (std::size_t start = 0; start < m; ++start) {
    for (std::size_t q0 : out[start]) {
      // BFS from the head of q0 back to `start`.
      const std::size_t head = p_.pairs()[q0].to;
      std::fill(seen.begin(), seen.end(), 0);
      queue.assign(1, head);
      seen[head] = 1;
      bool found = head == start;
      for (std::size_t qi = 0; qi < queue.size() && !found; ++qi) {
        for (std::size_t q : out[queue[qi]]) {
          const std::size_t v = p_.pairs()[q].to;
          if (seen[v]) continue;
          seen[v] = 1;
          via[v] = q;
          if (v == start) {
            found = true;
            break;
          }
          queue.push_back(v);
        }
      }
      if (!found) continue;
      std::vector<std::size_t> cyc{q0};
      for (std::size_t v = start; v != head;) {
        const std::size_t q = via[v];
        cyc.push_back(q);
        v = p_.pairs()[q].from;
      }
      std::sort(cyc.begin(), cyc.end());
      if (auto it = known_.find(cyc); it != known_.end()) {
        found_rows.push_back(it->second);
      } else if (rows_.size() < max_rows_) {
        rows_.push_back({cyc, static_cast<double>(cyc.size() - 1)});
        known_.emplace(std::move(cyc), rows_.size() - 1);
        found_rows.push_back(rows_.size() - 1);
      }
    }
  }
  return found_rows;
}

SubsetBound::Result SubsetBound::evaluate(const std::vector<signed char>& fixed,
                                          const std::vector<std::pair<std::size_t, double>>& warm_mu,
                                          double upper_bound, int iterations) {
  const std::size_t m = p_.m();
  const std::size_t np = p_.pairs().size();
  std::vector<std::uint32_t> ones(m), zeros(m);
  for (std::size_t k = 0; k < m; ++k) masks_for(k, fixed, ones[k], zeros[k]);

  // Working set: rows without a pair fixed to 0.
  std::vector<std::size_t> work;
  std::vector<double> mu;
  std::map<std::size_t, std::size_t> slot;  // row -> position in work
  auto enter = [&](std::size_t r, double value) {
    if (slot.contains(r)) return;
    for (std::size_t q : rows_[r].pairs)
      if (fixed[q] == 0) return;
    slot.emplace(r, work.size());
    work.push_back(r);
    mu.push_back(value);
  };
  for (const auto& [r, v] : warm_mu) enter(r, v);

  Result best;
  Vector cost(np, 0.0);
  std::vector<std::uint32_t> choice(m);
  std::vector<double> best_mu;
  std::vector<std::size_t> best_work;
  double theta = 1.0;
  int stale = 0;
  for (int it = 0; it <= iterations; ++it) {
    std::fill(cost.begin(), cost.end(), 0.0);
    double l = 0.0;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (mu[i] == 0.0) continue;
      for (std::size_t q : rows_[work[i]].pairs) cost[q] += mu[i];
      l -= mu[i] * rows_[work[i]].rhs;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const ColumnPick pick = best_mask(k, ones[k], zeros[k], cost);
      choice[k] = pick.mask;
      l += pick.value;
    }
    if (l > best.bound) {
      best.bound = l;
      best.choice = choice;
      best.cost = cost;
      best_mu = mu;
      best_work = work;
      stale = 0;
    } else if (++stale >= 4) {
      theta *= 0.5;
      stale = 0;
    }
    if (!std::isfinite(l) || l >= upper_bound || it == iterations) break;

    for (std::size_t r : separate(choice)) enter(r, 0.0);
    double norm2 = 0.0;
    std::vector<double> sub(work.size(), 0.0);
    for (std::size_t i = 0; i < work.size(); ++i) {
      double used = 0.0;
      for (std::size_t q : rows_[work[i]].pairs) used += chosen(choice, q) ? 1.0 : 0.0;
      double g = used - rows_[work[i]].rhs;
      if (mu[i] <= 0.0 && g < 0.0) g = 0.0;
      sub[i] = g;
      norm2 += g * g;
    }
    if (norm2 == 0.0) break;
    const double gap = std::isfinite(upper_bound) ? upper_bound - l : 1.0;
    const double step = theta * std::max(gap, 1e-6) / norm2;
    for (std::size_t i = 0; i < work.size(); ++i) mu[i] = std::max(0.0, mu[i] + step * sub[i]);
  }

  if (best.choice.empty()) {
    best.choice.assign(m, 0);
    best.cost.assign(np, 0.0);
  }
  for (std::size_t i = 0; i < best_work.size(); ++i)
    if (best_mu[i] > 0.0) best.mu.emplace_back(best_work[i], best_mu[i]);
  std::sort(best.mu.begin(), best.mu.end());
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < pair_of_[k].size(); ++a)
      if (best.choice[k] >> a & 1u) best.edges.push_back({sources_[k][a], k});
  std::sort(best.edges.begin(), best.edges.end());
  best.acyclic = is_acyclic(m, best.edges);
  for (const auto& [r, v] : best.mu) {
    double used = 0.0;
    for (std::size_t q : rows_[r].pairs) used += chosen(best.choice, q) ? 1.0 : 0.0;
    best.slack += v * (rows_[r].rhs - used);
  }
  return best;
}

std::pair<std::vector<std::size_t>, double> SubsetBound::best_parents(std::size_t k,
                                                                   const std::vector<char>& allowed) const {
  std::uint32_t zeros = 0;
  for (std::size_t a = 0; a < sources_[k].size(); ++a)
    if (!allowed[sources_[k][a]]) zeros |= 1u << a;
  std::uint32_t best = 0;
  double value = score_[k][0];
  for (std::uint32_t mask = 1; mask < score_[k].size(); ++mask)
    if (!(mask & zeros) && score_[k][mask] < value) {
      best = mask;
      value = score_[k][mask];
    }
  std::vector<std::size_t> parents;
  for (std::size_t a = 0; a < sources_[k].size(); ++a)
    if (best >> a & 1u) parents.push_back(sources_[k][a]);
  return {parents, value};
}

double SubsetBound::removal_cost(const Result& r, const std::vector<signed char>& fixed, std::size_t from,
                                 std::size_t to) const {
  const auto q = p_.pair_index(from, to);
  if (!q) return std::numeric_limits<double>::infinity();
  std::uint32_t ones, zeros;
  masks_for(to, fixed, ones, zeros);
  const std::uint32_t bit = 1u << bit_of_[*q];
  if (ones & bit) return std::numeric_limits<double>::infinity();
  const double with = best_mask(to, ones, zeros, r.cost).value;
  const double without = best_mask(to, ones, zeros | bit, r.cost).value;
  return without - with;
}

}  // namespace micpdag
