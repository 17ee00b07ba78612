#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tcm/matrix.hpp"

namespace tcm {

enum class ReadoutKind { mean, sum, max };

ReadoutKind readout_from_string(const std::string& s);
std::string readout_name(ReadoutKind k);

// Column-wise pooling of an N x d matrix down to a 1 x d row.
Matrix readout(const Matrix& h, ReadoutKind kind);

struct LeastSquares {
  Matrix w;
  double residual;  // ||H*W - Y||_F
};

// Normal-equations solve of min_W ||H W - Y||_F^2 + ridge ||W||_F^2.
// Throws SingularityError when the normal matrix is singular and ridge == 0.
LeastSquares least_squares_closed(const Matrix& h, const Matrix& y, double ridge = 0.0);

// Solve (symmetric positive definite) A X = B via Cholesky.
Matrix solve_spd(const Matrix& a, const Matrix& b);

struct EigenSym {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
EigenSym eigen_symmetric(const Matrix& s);

// Top-`rank` principal directions of column-centered X (F x rank). Each
// direction's first nonzero loading is positive so outputs are reproducible.
Matrix pca_directions(const Matrix& x, int rank);

// Projects column-centered X onto its top-`rank` principal directions.
Matrix pca_project(const Matrix& x, int rank);

// Per-column z-scoring with population sd; near-constant columns map to zero.
Matrix zscore_columns(const Matrix& m);

}  // namespace tcm
