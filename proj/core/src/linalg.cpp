#include "tcm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcm/errors.hpp"

namespace tcm {

ReadoutKind readout_from_string(const std::string& s) {
  if (s == "mean") return ReadoutKind::mean;
  if (s == "sum") return ReadoutKind::sum;
  if (s == "max") return ReadoutKind::max;
  throw ParamError("unknown readout kind: " + s);
}

std::string readout_name(ReadoutKind k) {
  switch (k) {
    case ReadoutKind::mean: return "mean";
    case ReadoutKind::sum: return "sum";
    case ReadoutKind::max: return "max";
  }
  return "mean";
}

Matrix readout(const Matrix& h, ReadoutKind kind) {
  if (h.rows() < 1) throw DimensionError("readout: empty matrix");
  Matrix out(1, h.cols());
  switch (kind) {
    case ReadoutKind::mean: {
      auto mu = col_means(h);
      for (int j = 0; j < h.cols(); ++j) out(0, j) = mu[j];
      break;
    }
    case ReadoutKind::sum: {
      auto s = col_sums(h);
      for (int j = 0; j < h.cols(); ++j) out(0, j) = s[j];
      break;
    }
    case ReadoutKind::max: {
      for (int j = 0; j < h.cols(); ++j) out(0, j) = h(0, j);
      for (int i = 1; i < h.rows(); ++i)
        for (int j = 0; j < h.cols(); ++j) out(0, j) = std::max(out(0, j), h(i, j));
      break;
    }
  }
  return out;
}

namespace {

// Cholesky factorization in place; returns false on a non-positive pivot.
bool cholesky(Matrix& a) {
  int n = a.rows();
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (d <= 1e-300) return false;
    double l = std::sqrt(d);
    a(j, j) = l;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  return true;
}

}  // namespace

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw DimensionError("solve_spd: shape mismatch");
  Matrix l = a;
  if (!cholesky(l))
    throw SingularityError("singular normal matrix; a positive ridge makes the solve well-posed");
  int n = a.rows(), m = b.cols();
  Matrix x = b;
  // forward substitution L z = b
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < n; ++i) {
      double s = x(i, c);
      for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    // back substitution L^T x = z
    for (int i = n - 1; i >= 0; --i) {
      double s = x(i, c);
      for (int k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

LeastSquares least_squares_closed(const Matrix& h, const Matrix& y, double ridge) {
  if (h.rows() != y.rows()) throw DimensionError("least_squares_closed: row counts differ");
  if (ridge < 0.0) throw ParamError("least_squares_closed: ridge must be nonnegative");
  Matrix gram = matmul_tn(h, h);
  for (int i = 0; i < gram.rows(); ++i) gram(i, i) += ridge;
  Matrix rhs = matmul_tn(h, y);
  Matrix w = solve_spd(gram, rhs);
  double residual = frobenius_distance(matmul(h, w), y);
  return {std::move(w), residual};
}

EigenSym eigen_symmetric(const Matrix& s) {
  if (s.rows() != s.cols()) throw DimensionError("eigen_symmetric: matrix not square");
  int n = s.rows();
  Matrix a = s;
  Matrix v = Matrix::identity(n);

  auto off_norm = [&]() {
    double t = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) t += a(i, j) * a(i, j);
    return std::sqrt(2.0 * t);
  };

  const double tol = 1e-14 * std::max(1.0, a.frobenius());
  for (int sweep = 0; sweep < 128 && off_norm() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return diag[x] > diag[y]; });

  EigenSym out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int c = 0; c < n; ++c) {
    out.values[c] = diag[order[c]];
    for (int r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

namespace {

Matrix center_columns(const Matrix& x) {
  auto mu = col_means(x);
  Matrix c = x;
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) c(i, j) -= mu[j];
  return c;
}

void fix_direction_signs(Matrix& dirs) {
  for (int c = 0; c < dirs.cols(); ++c) {
    for (int r = 0; r < dirs.rows(); ++r) {
      double v = dirs(r, c);
      if (std::fabs(v) > 1e-12) {
        if (v < 0)
          for (int k = 0; k < dirs.rows(); ++k) dirs(k, c) = -dirs(k, c);
        break;
      }
    }
  }
}

}  // namespace

Matrix pca_directions(const Matrix& x, int rank) {
  if (rank < 1 || rank > std::min(x.rows(), x.cols()))
    throw ParamError("pca rank out of bounds");
  Matrix c = center_columns(x);
  Matrix cov = matmul_tn(c, c);
  cov.scale(1.0 / std::max(1, x.rows()));
  EigenSym eig = eigen_symmetric(cov);
  Matrix dirs(x.cols(), rank);
  for (int j = 0; j < rank; ++j)
    for (int i = 0; i < x.cols(); ++i) dirs(i, j) = eig.vectors(i, j);
  fix_direction_signs(dirs);
  return dirs;
}

Matrix pca_project(const Matrix& x, int rank) {
  Matrix dirs = pca_directions(x, rank);
  return matmul(center_columns(x), dirs);
}

Matrix zscore_columns(const Matrix& m) {
  Matrix z = m;
  int n = m.rows();
  if (n == 0) return z;
  for (int j = 0; j < m.cols(); ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += m(i, j);
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = m(i, j) - mu;
      var += d * d;
    }
    var /= n;
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      for (int i = 0; i < n; ++i) z(i, j) = 0.0;
    } else {
      for (int i = 0; i < n; ++i) z(i, j) = (m(i, j) - mu) / sd;
    }
  }
  return z;
}

}  // namespace tcm
