#include "micpdag/oa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace micpdag {

double OaCut::intercept() const { return 2.0 - 2.0 * std::log(anchor); }

OaCut oa_cut_at(std::size_t node, double gamma_ii, double floor) {
  if (!(gamma_ii >= floor) || !std::isfinite(gamma_ii))
    throw std::invalid_argument("OA cut anchor " + std::to_string(gamma_ii) + " is below the diagonal floor");
  return {node, gamma_ii};
}

CutEnvelope::CutEnvelope(const std::vector<OaCut>& cuts, double lo, double hi) {
  struct Line {
    double a, b;  // a + b x
  };
  std::vector<Line> lines;
  lines.reserve(cuts.size());
  for (const OaCut& c : cuts) lines.push_back({c.intercept(), c.slope()});
  std::sort(lines.begin(), lines.end(), [](const Line& l, const Line& r) { return l.b < r.b || (l.b == r.b && l.a > r.a); });
  lines.erase(std::unique(lines.begin(), lines.end(), [](const Line& l, const Line& r) { return l.b == r.b; }),
              lines.end());

  auto cross = [](const Line& l, const Line& r) { return (l.a - r.a) / (r.b - l.b); };
  std::vector<Line> hull;
  for (const Line& l : lines) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 1], l) <= cross(hull[hull.size() - 2], hull[hull.size() - 1]))
      hull.pop_back();
    hull.push_back(l);
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    double from = i == 0 ? -std::numeric_limits<double>::infinity() : cross(hull[i - 1], hull[i]);
    double to = i + 1 == hull.size() ? std::numeric_limits<double>::infinity() : cross(hull[i], hull[i + 1]);
    from = std::max(from, lo);
    to = std::min(to, hi);
    if (from < to || (from == to && pieces_.empty() && i + 1 == hull.size())) pieces_.push_back({hull[i].a, hull[i].b, from, to});
  }
  if (pieces_.empty() && !hull.empty()) {
    // Degenerate interval: keep the line that is maximal at lo.
    const Line* best = &hull.front();
    for (const Line& l : hull)
      if (l.a + l.b * lo > best->a + best->b * lo) best = &l;
    pieces_.push_back({best->a, best->b, lo, hi});
  }
}

double CutEnvelope::operator()(double x) const {
  double v = -std::numeric_limits<double>::infinity();
  for (const Piece& p : pieces_) v = std::max(v, p.intercept + p.slope * x);
  return v;
}

std::pair<double, double> CutEnvelope::minimize(double curvature, double linear) const {
  double best_x = pieces_.empty() ? 0.0 : pieces_.front().lo;
  double best_v = std::numeric_limits<double>::infinity();
  for (const Piece& p : pieces_) {
    const double lin = linear + p.slope;
    double x = 0.0;
    if (curvature > 0.0) {
      x = std::clamp(-lin / (2.0 * curvature), p.lo, p.hi);
    } else {
      x = lin < 0.0 ? p.hi : p.lo;
    }
    const double v = curvature * x * x + lin * x + p.intercept;
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  return {best_x, best_v};
}

bool CutPool::add(const OaCut& cut) {
  auto& list = cuts_.at(cut.node);
  for (const OaCut& c : list)
    if (std::abs(c.anchor - cut.anchor) <= 1e-9 * std::max(1.0, c.anchor)) return false;
  list.push_back(cut);
  return true;
}

std::size_t CutPool::size() const {
  std::size_t n = 0;
  for (const auto& l : cuts_) n += l.size();
  return n;
}

IntegerOaTrace solve_integer_log_program(double start, double linear, double x_max, double tol) {
  if (!(start >= 1.0) || !(x_max >= start)) throw std::invalid_argument("integer OA: need 1 <= start <= x_max");
  IntegerOaTrace trace;
  double x = start;
  double y = -std::numeric_limits<double>::infinity();
  for (int round = 0; round < 10000; ++round) {
    if (y >= -2.0 * std::log(x) - tol) break;
    const OaCut cut = oa_cut_at(0, x, 1.0);
    trace.anchors.push_back(x);
    trace.cuts.push_back(cut);
    const CutEnvelope env(trace.cuts, 1.0, x_max);
    // The master objective is convex in x, so its integer minimizer is a
    // neighbour of the continuous one.
    const double xc = env.minimize(0.0, linear).first;
    double best_x = 0.0;
    double best_v = std::numeric_limits<double>::infinity();
    for (double cand : {std::floor(xc), std::ceil(xc)}) {
      cand = std::clamp(cand, 1.0, std::floor(x_max));
      const double v = env(cand) + linear * cand;
      if (v < best_v || (v == best_v && cand < best_x)) {
        best_v = v;
        best_x = cand;
      }
    }
    x = best_x;
    y = env(x);
    trace.master_x.push_back(x);
    trace.master_y.push_back(y);
  }
  trace.x = x;
  trace.value = -2.0 * std::log(x) + linear * x;
  return trace;
}

}  // namespace micpdag
