#include "tcm/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "tcm/errors.hpp"

namespace tcm {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw DimensionError("matrix dimensions must be nonnegative");
}

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("matrix data length does not match rows*cols");
}

Matrix Matrix::identity(int n) { return eye(n, n); }

Matrix Matrix::eye(int rows, int cols) {
  Matrix m(rows, cols);
  int d = rows < cols ? rows : cols;
  for (int i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

void Matrix::fill(double v) {
  for (auto& x : data_) x = v;
}

void Matrix::add_scaled(const Matrix& other, double scale) {
  if (!same_shape(other)) throw DimensionError("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void Matrix::scale(double s) {
  for (auto& x : data_) x *= s;
}

bool Matrix::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

void Matrix::require_finite(const std::string& what) const {
  if (!all_finite()) throw Error("non-finite values in " + what);
}

double Matrix::frobenius() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) {
    double a = std::fabs(x);
    if (a > m) m = a;
  }
  return m;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("operator+: shape mismatch");
  Matrix r = a;
  r.add_scaled(b, 1.0);
  return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("operator-: shape mismatch");
  Matrix r = a;
  r.add_scaled(b, -1.0);
  return r;
}

Matrix operator*(const Matrix& a, double s) {
  Matrix r = a;
  r.scale(s);
  return r;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  // i-k-j order so the inner loop streams over contiguous rows.
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    double* crow = c.row(i).data();
    for (int k = 0; k < a.cols(); ++k) {
      double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (int j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    const double* arow = a.row(k).data();
    const double* brow = b.row(k).data();
    for (int i = 0; i < a.cols(); ++i) {
      double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row(i).data();
      for (int j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("hadamard: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> col_means(const Matrix& m) {
  std::vector<double> mu = col_sums(m);
  if (m.rows() > 0)
    for (auto& x : mu) x /= m.rows();
  return mu;
}

std::vector<double> col_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (int j = 0; j < m.cols(); ++j) s[j] += r[j];
  }
  return s;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("frobenius_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace tcm
