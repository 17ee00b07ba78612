#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tcm {

// Dense row-major matrix of doubles. Everything in this project is desk
// scale (N up to a few hundred), so a flat vector plus plain loops beats
// pulling in a linear-algebra dependency and keeps results bit-reproducible.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix identity(int n);
  static Matrix eye(int rows, int cols);  // ones on the main diagonal

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::span<double> row(int i) { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int i) const { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix transposed() const;

  void fill(double v);
  void add_scaled(const Matrix& other, double scale);  // *this += scale * other
  void scale(double s);

  bool all_finite() const;
  // Throws DimensionError-free check: raises Error naming `what` on NaN/Inf.
  void require_finite(const std::string& what) const;

  double frobenius() const;
  double max_abs() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, double s);

Matrix matmul(const Matrix& a, const Matrix& b);
// A^T * B without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// A * B^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);

std::vector<double> col_means(const Matrix& m);
std::vector<double> col_sums(const Matrix& m);

// Frobenius norm of (a - b).
double frobenius_distance(const Matrix& a, const Matrix& b);

}  // namespace tcm
