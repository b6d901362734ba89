#include "cg/matrix.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cg/error.hpp"
#include "cg/kernels.hpp"

namespace cg {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.values().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix out(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.cols(); ++c) {
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = e(r, c);
    }
  }
  return out;
}

void same_shape(const Matrix& a, const Matrix& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimMismatch,
          std::string(what) + ": shape mismatch");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  require(data_.size() == rows * cols, ErrorCode::ShapeMismatch,
          "matrix payload does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorCode::ShapeMismatch, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix out(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
  return out;
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorCode::DimMismatch, "matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  Eigen::Map<RowMajor> dst(out.values().data(), static_cast<Eigen::Index>(out.rows()),
                           static_cast<Eigen::Index>(out.cols()));
  dst.noalias() = view(a) * view(b);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  same_shape(a, b, "subtract");
  Matrix out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] -= b.values()[i];
  return out;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  require(m.cols() == x.size(), ErrorCode::DimMismatch, "matvec: vector length mismatch");
  Vector y(m.rows());
  simd::gemv(m.values(), m.rows(), m.cols(), x, y);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch, "dot: length mismatch");
  return simd::dot(a, b);
}

double norm(std::span<const double> a) { return std::sqrt(simd::dot(a, a)); }

Vector add(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch, "add: length mismatch");
  Vector out(a.begin(), a.end());
  simd::axpy(1.0, b, out);
  return out;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch, "subtract: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scaled(std::span<const double> a, double s) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(simd::dot(m.values(), m.values())); }

double max_abs(const Matrix& m) {
  double out = 0.0;
  for (double v : m.values()) out = std::max(out, std::abs(v));
  return out;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

SymmetricEigen symmetric_eigen(const Matrix& symmetric) {
  require(symmetric.rows() == symmetric.cols(), ErrorCode::NotSquare,
          "symmetric_eigen: matrix is not square");
  const Eigen::MatrixXd dense = view(symmetric);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  require(solver.info() == Eigen::Success, ErrorCode::InvalidArgument,
          "symmetric eigendecomposition did not converge");
  SymmetricEigen out;
  out.values.assign(solver.eigenvalues().data(),
                    solver.eigenvalues().data() + solver.eigenvalues().size());
  out.vectors = from_eigen(solver.eigenvectors());
  return out;
}

Matrix reconstruct(const SymmetricEigen& eig, std::span<const double> scale) {
  const auto n = static_cast<Eigen::Index>(eig.values.size());
  require(scale.size() == eig.values.size(), ErrorCode::DimMismatch,
          "reconstruct: scale length mismatch");
  const Eigen::MatrixXd vecs = view(eig.vectors);
  const Eigen::Map<const Eigen::VectorXd> s(scale.data(), n);
  const Eigen::MatrixXd scaled_vecs = vecs * s.asDiagonal();
  Eigen::MatrixXd out = scaled_vecs * vecs.transpose();
  // Exact symmetry; the product is symmetric only up to rounding.
  out = 0.5 * (out + out.transpose()).eval();
  return from_eigen(out);
}

Matrix inverse(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorCode::NotSquare, "inverse: matrix is not square");
  const Eigen::MatrixXd dense = view(m);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
  require(lu.isInvertible(), ErrorCode::InvalidArgument, "inverse: matrix is singular");
  return from_eigen(lu.inverse());
}

double condition_number(const Matrix& m) {
  const Eigen::MatrixXd dense = view(m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

}  // namespace cg
