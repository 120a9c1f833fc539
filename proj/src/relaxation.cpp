#include "micpdag/relaxation.hpp"

#include <algorithm>
#include <cmath>

namespace micpdag {

BnbNode root_node(const MicpProblem& p) {
  BnbNode n;
  n.fixed.assign(p.pairs().size(), kFree);
  return n;
}

std::optional<std::vector<signed char>> propagate_fixings(const MicpProblem& p, const std::vector<signed char>& fixed) {
  const std::size_t m = p.m();
  const auto& pairs = p.pairs();
  if (fixed.size() != pairs.size()) throw std::invalid_argument("propagate_fixings: wrong fixing vector size");
  std::vector<Edge> ones;
  std::vector<std::vector<std::size_t>> out(m);
  for (std::size_t q = 0; q < pairs.size(); ++q)
    if (fixed[q] == 1) {
      ones.push_back(pairs[q]);
      out[pairs[q].from].push_back(pairs[q].to);
    }
  if (!is_acyclic(m, ones)) return std::nullopt;

  // reach[a][b]: b reachable from a through fixed edges
  std::vector<std::vector<char>> reach(m, std::vector<char>(m, 0));
  std::vector<std::size_t> stack;
  for (std::size_t a = 0; a < m; ++a) {
    stack.assign(1, a);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : out[u])
        if (!reach[a][v]) {
          reach[a][v] = 1;
          stack.push_back(v);
        }
    }
  }
  std::vector<signed char> res = fixed;
  for (std::size_t q = 0; q < pairs.size(); ++q)
    if (res[q] == kFree && reach[pairs[q].to][pairs[q].from]) res[q] = 0;
  return res;
}

namespace {

struct Piece {
  double quad, lin, cst, lo, hi;  // quad u^2 + lin u + cst on [lo, hi], u = |t|
};

template <class F>
void for_each_piece(const EdgePenalty& e, F&& f) {
  if (e.fixed_one) return f(Piece{e.delta, 0.0, e.lambda_sq, 0.0, e.big_m});
  if (e.lambda_sq <= 0.0) return f(Piece{e.delta, 0.0, 0.0, 0.0, e.big_m});
  const double lam = std::sqrt(e.lambda_sq);
  const double sd = std::sqrt(e.delta);
  if (e.big_m * sd >= lam) {
    const double brk = lam / sd;
    f(Piece{0.0, 2.0 * lam * sd, 0.0, 0.0, brk});
    f(Piece{e.delta, 0.0, e.lambda_sq, brk, e.big_m});
  } else {
    f(Piece{0.0, e.delta * e.big_m + e.lambda_sq / e.big_m, 0.0, 0.0, e.big_m});
  }
}

}  // namespace

double EdgePenalty::value(double a) const {
  double v = 0.0;
  bool hit = false;
  for_each_piece(*this, [&](const Piece& pc) {
    if (!hit && a <= pc.hi) {
      v = pc.quad * a * a + pc.lin * a + pc.cst;
      hit = true;
    }
  });
  if (!hit) v = std::numeric_limits<double>::infinity();
  return v;
}

double EdgePenalty::indicator(double a) const {
  if (fixed_one) return 1.0;
  if (a <= 0.0) return 0.0;
  if (lambda_sq <= 0.0) return 1.0;
  const double lam = std::sqrt(lambda_sq);
  const double sd = std::sqrt(delta);
  if (big_m * sd >= lam) return std::min(1.0, a * sd / lam);
  return std::min(1.0, a / big_m);
}

double EdgePenalty::minimize(double curvature, double linear) const {
  double best_t = 0.0;
  double best_v = value(0.0);
  for (double sign : {1.0, -1.0}) {
    for_each_piece(*this, [&](const Piece& pc) {
      const double qa = curvature + pc.quad;
      const double qb = sign * linear + pc.lin;
      double u;
      if (qa > 0.0) {
        u = std::clamp(-qb / (2.0 * qa), pc.lo, pc.hi);
      } else {
        u = qb < 0.0 ? pc.hi : pc.lo;
      }
      const double v = qa * u * u + qb * u + pc.cst;
      if (v < best_v) {
        best_v = v;
        best_t = sign * u;
      }
    });
  }
  return best_t;
}

double DiagonalTerm::log_part(double x) const { return envelope ? (*envelope)(x) : -2.0 * std::log(x); }

double DiagonalTerm::minimize(double curvature, double linear) const {
  const double c = curvature + delta;
  if (envelope) return envelope->minimize(c, linear).first;
  double x;
  if (c > 0.0) {
    x = 4.0 / (linear + std::sqrt(linear * linear + 16.0 * c));
  } else {
    x = linear > 0.0 ? 2.0 / linear : big_m;
  }
  return std::clamp(x, kDiagonalFloor, big_m);
}

bool is_integral(const Vector& g, double tol) {
  for (double v : g)
    if (std::min(std::abs(v), std::abs(1.0 - v)) > tol) return false;
  return true;
}

namespace {

struct ColumnResult {
  std::vector<std::size_t> vars;
  Vector x;
  double f = 0.0;
  double lb = -std::numeric_limits<double>::infinity();
  int sweeps = 0;
  bool converged = false;
};

ColumnResult solve_column(const MicpProblem& p, std::size_t k, const std::vector<signed char>& fixed,
                          const CutEnvelope* env, const Matrix* warm, const RelaxOptions& opt, double tol) {
  ColumnResult r;
  std::vector<EdgePenalty> edges;
  r.vars.push_back(k);
  edges.push_back({});
  for (std::size_t q : p.column_pairs(k)) {
    if (fixed[q] == 0) continue;
    const std::size_t j = p.pairs()[q].from;
    r.vars.push_back(j);
    const double extra = opt.pair_cost ? (*opt.pair_cost)[q] : 0.0;
    edges.push_back({p.delta()[j], p.lambda_sq() + extra, p.big_m(), fixed[q] == 1});
  }
  const DiagonalTerm diag{p.delta()[k], p.big_m(), env};
  const std::size_t n = r.vars.size();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < n; ++l) a(i, l) = p.q()(r.vars[i], r.vars[l]);

  r.x.assign(n, 0.0);
  const double bm = p.big_m();
  if (warm && warm->rows() == p.m()) {
    for (std::size_t i = 0; i < n; ++i) r.x[i] = std::clamp((*warm)(r.vars[i], k), -bm, bm);
    r.x[0] = std::clamp(r.x[0], kDiagonalFloor, bm);
  } else {
    r.x[0] = std::clamp(1.0 / std::sqrt(p.s()(k, k)), kDiagonalFloor, bm);
  }

  auto term = [&](std::size_t i, double t) { return i == 0 ? diag.value(t) : edges[i].value(std::abs(t)); };
  auto argmin = [&](std::size_t i, double curv, double lin) {
    return i == 0 ? diag.minimize(curv, lin) : edges[i].minimize(curv, lin);
  };

  Vector ax(n);
  auto evaluate = [&]() {
    ax = a * r.x;
    double quad = 0.0;
    double f = 0.0;
    double lb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      quad += r.x[i] * ax[i];
      f += term(i, r.x[i]);
      const double c = 2.0 * ax[i];
      const double y = argmin(i, 0.0, c);
      lb += c * y + term(i, y);
    }
    r.f = quad + f;
    r.lb = std::max(r.lb, lb - quad);
    return r.f - r.lb <= tol;
  };

  if (evaluate()) {
    r.converged = true;
    return r;
  }
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const double lin = 2.0 * (ax[i] - a(i, i) * r.x[i]);
      const double t = argmin(i, a(i, i), lin);
      const double d = t - r.x[i];
      if (d == 0.0) continue;
      for (std::size_t l = 0; l < n; ++l) ax[l] += a(l, i) * d;
      r.x[i] = t;
    }
    r.sweeps = sweep;
    if (sweep % opt.check_every == 0 || sweep == opt.max_sweeps) {
      if (evaluate()) {
        r.converged = true;
        break;
      }
    }
  }
  return r;
}

}  // namespace

RelaxResult solve_node_relaxation(const MicpProblem& p, const BnbNode& node, const CutPool& cuts,
                                  const RelaxOptions& opt) {
  const std::size_t m = p.m();
  RelaxResult res;
  auto fixed = propagate_fixings(p, node.fixed);
  if (!fixed) {
    res.status = RelaxStatus::infeasible;
    return res;
  }
  res.fixed = std::move(*fixed);

  std::vector<CutEnvelope> envs(m);
  if (!opt.exact_log) {
    for (std::size_t k = 0; k < m; ++k) {
      if (cuts.cuts(k).empty()) throw std::invalid_argument("node relaxation: node without OA cuts is unbounded");
      envs[k] = CutEnvelope(cuts.cuts(k), kDiagonalFloor, p.big_m());
    }
  }
  const double col_tol = opt.tol / static_cast<double>(m);
  std::vector<ColumnResult> cols(m);
  auto run = [&](std::size_t k) {
    cols[k] = solve_column(p, k, res.fixed, opt.exact_log ? nullptr : &envs[k], node.warm.get(), opt, col_tol);
  };
  if (opt.exec == kernels::Exec::serial) {
    for (std::size_t k = 0; k < m; ++k) run(k);
  } else {
    const auto mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < mm; ++k) run(static_cast<std::size_t>(k));
  }

  const auto& pairs = p.pairs();
  RelaxedPoint& pt = res.point;
  pt.gamma = Matrix(m, m);
  pt.g.assign(pairs.size(), 0.0);
  pt.s_off.assign(pairs.size(), 0.0);
  pt.s_diag.assign(m, 0.0);
  pt.t.assign(m, 0.0);
  res.value = 0.0;
  res.lower_bound = 0.0;
  bool all_converged = true;
  for (std::size_t k = 0; k < m; ++k) {
    const ColumnResult& c = cols[k];
    for (std::size_t i = 0; i < c.vars.size(); ++i) pt.gamma(c.vars[i], k) = c.x[i];
    const double x = c.x[0];
    pt.s_diag[k] = x * x;
    pt.t[k] = opt.exact_log ? -2.0 * std::log(x) : envs[k](x);
    res.value += c.f;
    res.lower_bound += c.lb;
    res.sweeps = std::max(res.sweeps, c.sweeps);
    all_converged = all_converged && c.converged;
  }
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    const double gamma = pt.gamma(pairs[q].from, pairs[q].to);
    const double extra = opt.pair_cost ? (*opt.pair_cost)[q] : 0.0;
    const EdgePenalty e{p.delta()[pairs[q].from], p.lambda_sq() + extra, p.big_m(), res.fixed[q] == 1};
    double g = res.fixed[q] == 0 ? 0.0 : e.indicator(std::abs(gamma));
    pt.g[q] = g;
    pt.s_off[q] = g > 0.0 ? gamma * gamma / g : 0.0;
  }
  res.status = all_converged ? RelaxStatus::ok : RelaxStatus::stall;
  return res;
}

}  // namespace micpdag
