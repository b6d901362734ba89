#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cg {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Rows are contiguous so a row can be
/// handed to the SIMD kernels as a span without copying.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  Vector column(std::size_t c) const;

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);

/// y = m * x
Vector matvec(const Matrix& m, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
Vector add(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
bool all_finite(std::span<const double> values);

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascending; column i
/// of `vectors` belongs to `values[i]`.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

SymmetricEigen symmetric_eigen(const Matrix& symmetric);

/// V * diag(scale) * V^T for a decomposition's eigenvectors V.
Matrix reconstruct(const SymmetricEigen& eig, std::span<const double> scale);

/// General inverse via pivoted LU; InvalidArgument when not invertible.
Matrix inverse(const Matrix& m);

/// Ratio of extreme singular values.
double condition_number(const Matrix& m);

}  // namespace cg
