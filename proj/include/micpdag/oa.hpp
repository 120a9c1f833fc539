#pragma once

#include <cstddef>
#include <vector>

namespace micpdag {

/// Tangent under-estimator of -2 log(x) at `anchor`:
///   T_i >= -2 log(anchor) - (2 / anchor) (Gamma_ii - anchor)
///        = intercept() + slope() * Gamma_ii.
struct OaCut {
  std::size_t node = 0;
  double anchor = 1.0;

  double slope() const { return -2.0 / anchor; }
  double intercept() const;
  double operator()(double x) const { return intercept() + slope() * x; }
};

/// Throws std::invalid_argument for anchors below `floor`.
OaCut oa_cut_at(std::size_t node, double gamma_ii, double floor);

/// Upper envelope max_t cut_t(x) of a set of cuts over [lo, hi], stored as
/// contiguous linear pieces.
class CutEnvelope {
 public:
  struct Piece {
    double intercept;
    double slope;
    double lo;
    double hi;
  };

  CutEnvelope() = default;
  CutEnvelope(const std::vector<OaCut>& cuts, double lo, double hi);

  bool empty() const { return pieces_.empty(); }
  const std::vector<Piece>& pieces() const { return pieces_; }
  double operator()(double x) const;

  /// argmin and min of  curvature*x^2 + linear*x + envelope(x)  over [lo, hi]
  /// (curvature >= 0).
  std::pair<double, double> minimize(double curvature, double linear) const;

 private:
  std::vector<Piece> pieces_;
};

/// Pool of cuts, one list per node. Anchors closer than a relative 1e-9 to
/// an existing anchor of the same node are ignored.
class CutPool {
 public:
  explicit CutPool(std::size_t m = 0) : cuts_(m) {}
  bool add(const OaCut& cut);
  const std::vector<OaCut>& cuts(std::size_t node) const { return cuts_[node]; }
  std::size_t size() const;
  std::size_t nodes() const { return cuts_.size(); }

 private:
  std::vector<std::vector<OaCut>> cuts_;
};

/// Outer approximation on  min_{x in {1, 2, ..., x_max}} -2 log x + linear * x:
/// -2 log x is replaced by y bounded below by tangent cuts, each master
/// problem is solved exactly over the integers, and a cut is added at the
/// master's x until y >= -2 log x within tol.
struct IntegerOaTrace {
  std::vector<double> anchors;          // relaxed iterates where cuts were added
  std::vector<OaCut> cuts;
  std::vector<double> master_x;         // master solution per round
  std::vector<double> master_y;
  double x = 0.0;
  double value = 0.0;                   // exact -2 log x + linear * x
};
IntegerOaTrace solve_integer_log_program(double start, double linear, double x_max, double tol = 1e-12);

}  // namespace micpdag
