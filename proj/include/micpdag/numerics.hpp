#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace micpdag {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sizes in this project stay below a few hundred, so
/// there is no blocking or sparse storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  Matrix transpose() const;
  double max_abs() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// Square matrix whose entries are exactly symmetric. Construction from a
/// general matrix rejects asymmetry beyond a relative tolerance and then
/// averages the two triangles so downstream code can rely on exact symmetry.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Matrix m, double tol = 1e-10);
  static SymmetricMatrix identity(std::size_t n) { return SymmetricMatrix(Matrix::identity(n)); }
  static SymmetricMatrix diagonal(std::span<const double> d) {
    return SymmetricMatrix(Matrix::diagonal(d));
  }

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

  /// Sets (i,j) and (j,i) together.
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  Vector diag() const;
  double max_diag() const;
  SymmetricMatrix shifted(double sigma) const;
  SymmetricMatrix minus_diagonal(std::span<const double> d) const;
  SymmetricMatrix principal(std::span<const std::size_t> idx) const;

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  Matrix m_;
};

class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot)
      : std::runtime_error("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Relative pivot tolerance of the positive-definiteness test.
inline constexpr double kPivotTolerance = 1e-12;

/// Lower-triangular L with L*L^T == a, or nullopt when some pivot falls at or
/// below kPivotTolerance * max diagonal. The failing pivot is written to
/// `failed_pivot` when provided.
std::optional<Matrix> try_cholesky(const SymmetricMatrix& a, std::size_t* failed_pivot = nullptr);

/// Throws NotPositiveDefinite.
Matrix cholesky(const SymmetricMatrix& a);

bool is_positive_definite(const SymmetricMatrix& a);

/// PSD test used throughout: a + tol*I must factor.
bool is_psd(const SymmetricMatrix& a, double tol);

/// Smallest eigenvalue to within `tol`, by bisection on the shifted
/// factorization test over the Gershgorin interval.
double min_eigenvalue(const SymmetricMatrix& a, double tol = 1e-9);

Vector cholesky_solve(const Matrix& lower, std::span<const double> b);
Vector spd_solve(const SymmetricMatrix& a, std::span<const double> b);
Matrix spd_inverse(const SymmetricMatrix& a);

/// log det from a Cholesky factor.
double log_det_from_cholesky(const Matrix& lower);

double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> a);

}  // namespace micpdag
