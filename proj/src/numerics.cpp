#include "micpdag/numerics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace micpdag {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::max_abs() const {
  double v = 0.0;
  for (double x : data_) v = std::max(v, std::abs(x));
  return v;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector product: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix sum: dimension mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.values().size(); ++i) c.values()[i] += b.values()[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix difference: dimension mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.values().size(); ++i) c.values()[i] -= b.values()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

SymmetricMatrix::SymmetricMatrix(Matrix m, double tol) : m_(std::move(m)) {
  if (!m_.square()) throw std::invalid_argument("symmetric matrix must be square");
  if (m_.rows() == 0) throw std::invalid_argument("symmetric matrix must have dim >= 1");
  const double scale = std::max(1.0, m_.max_abs());
  for (std::size_t i = 0; i < m_.rows(); ++i)
    for (std::size_t j = i + 1; j < m_.cols(); ++j) {
      if (std::abs(m_(i, j) - m_(j, i)) > tol * scale)
        throw std::invalid_argument("matrix is not symmetric at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      const double avg = 0.5 * (m_(i, j) + m_(j, i));
      m_(i, j) = avg;
      m_(j, i) = avg;
    }
}

Vector SymmetricMatrix::diag() const {
  Vector d(dim());
  for (std::size_t i = 0; i < dim(); ++i) d[i] = m_(i, i);
  return d;
}

double SymmetricMatrix::max_diag() const {
  double v = m_(0, 0);
  for (std::size_t i = 1; i < dim(); ++i) v = std::max(v, m_(i, i));
  return v;
}

SymmetricMatrix SymmetricMatrix::shifted(double sigma) const {
  SymmetricMatrix r = *this;
  for (std::size_t i = 0; i < dim(); ++i) r.m_(i, i) += sigma;
  return r;
}

SymmetricMatrix SymmetricMatrix::minus_diagonal(std::span<const double> d) const {
  if (d.size() != dim()) throw std::invalid_argument("diagonal length mismatch");
  SymmetricMatrix r = *this;
  for (std::size_t i = 0; i < dim(); ++i) r.m_(i, i) -= d[i];
  return r;
}

SymmetricMatrix SymmetricMatrix::principal(std::span<const std::size_t> idx) const {
  Matrix p(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) p(a, b) = m_(idx[a], idx[b]);
  return SymmetricMatrix(std::move(p));
}

std::optional<Matrix> try_cholesky(const SymmetricMatrix& a, std::size_t* failed_pivot) {
  const std::size_t n = a.dim();
  const double threshold = kPivotTolerance * a.max_diag();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > threshold) || !(d > 0.0)) {
      if (failed_pivot) *failed_pivot = j;
      return std::nullopt;
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Matrix cholesky(const SymmetricMatrix& a) {
  std::size_t pivot = 0;
  auto l = try_cholesky(a, &pivot);
  if (!l) throw NotPositiveDefinite(pivot);
  return std::move(*l);
}

bool is_positive_definite(const SymmetricMatrix& a) { return try_cholesky(a).has_value(); }

bool is_psd(const SymmetricMatrix& a, double tol) { return try_cholesky(a.shifted(tol)).has_value(); }

double min_eigenvalue(const SymmetricMatrix& a, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("min_eigenvalue: tol must be positive");
  const std::size_t n = a.dim();
  double lo = a(0, 0);
  double hi = a(0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) radius += std::abs(a(i, j));
    lo = std::min(lo, a(i, i) - radius);
    hi = std::min(hi, a(i, i));  // lambda_min <= min diagonal
  }
  // Invariant: lambda_min in [lo, hi]. A - sigma*I factors iff sigma < lambda_min
  // (up to the pivot tolerance).
  lo -= tol;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (try_cholesky(a.shifted(-mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Vector cholesky_solve(const Matrix& lower, std::span<const double> b) {
  const std::size_t n = lower.rows();
  if (b.size() != n) throw std::invalid_argument("cholesky_solve: dimension mismatch");
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * y[k];
    y[i] = s / lower(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * y[k];
    y[ii] = s / lower(ii, ii);
  }
  return y;
}

Vector spd_solve(const SymmetricMatrix& a, std::span<const double> b) {
  return cholesky_solve(cholesky(a), b);
}

Matrix spd_inverse(const SymmetricMatrix& a) {
  const Matrix l = cholesky(a);
  const std::size_t n = a.dim();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector col = cholesky_solve(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  return inv;
}

double log_det_from_cholesky(const Matrix& lower) {
  double s = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(std::span<const double> a) {
  double v = 0.0;
  for (double x : a) v = std::max(v, std::abs(x));
  return v;
}

}  // namespace micpdag
