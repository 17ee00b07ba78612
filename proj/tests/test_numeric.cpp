#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tcm/errors.hpp"
#include "tcm/linalg.hpp"
#include "tcm/matrix.hpp"
#include "tcm/optim.hpp"
#include "tcm/rng.hpp"
#include "tcm/verify.hpp"

using namespace tcm;

namespace {

Matrix randn(int r, int c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = scale * rng.normal();
  return m;
}

// Test-side eigensolver for the PCA oracle check: plain power iteration with
// deflation, algorithmically independent of the Jacobi path under test.
Matrix power_iteration_projection(const Matrix& x, int rank) {
  auto mu = col_means(x);
  Matrix c = x;
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) c(i, j) -= mu[j];
  Matrix cov = matmul_tn(c, c);
  cov.scale(1.0 / x.rows());
  int f = cov.rows();
  Matrix dirs(f, rank);
  Matrix work = cov;
  for (int r = 0; r < rank; ++r) {
    std::vector<double> v(f, 1.0 / std::sqrt(double(f)));
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
      std::vector<double> nv(f, 0.0);
      for (int i = 0; i < f; ++i)
        for (int j = 0; j < f; ++j) nv[i] += work(i, j) * v[j];
      double norm = 0.0;
      for (double y : nv) norm += y * y;
      norm = std::sqrt(norm);
      for (auto& y : nv) y /= norm;
      double delta = 0.0;
      for (int i = 0; i < f; ++i) delta = std::max(delta, std::fabs(nv[i] - v[i]));
      v = nv;
      lambda = norm;
      if (delta < 1e-14) break;
    }
    for (int i = 0; i < f; ++i) dirs(i, r) = v[i];
    for (int i = 0; i < f; ++i)
      for (int j = 0; j < f; ++j) work(i, j) -= lambda * v[i] * v[j];
  }
  for (int r = 0; r < rank; ++r)
    for (int i = 0; i < f; ++i)
      if (std::fabs(dirs(i, r)) > 1e-12) {
        if (dirs(i, r) < 0)
          for (int k = 0; k < f; ++k) dirs(k, r) = -dirs(k, r);
        break;
      }
  return matmul(c, dirs);
}

}  // namespace

TEST_CASE("matrix basics") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == doctest::Approx(58));
  CHECK(c(0, 1) == doctest::Approx(64));
  CHECK(c(1, 0) == doctest::Approx(139));
  CHECK(c(1, 1) == doctest::Approx(154));

  Matrix at = a.transposed();
  CHECK(frobenius_distance(matmul_tn(a, a), matmul(at, a)) == doctest::Approx(0.0));
  CHECK(frobenius_distance(matmul_nt(a, a), matmul(a, at)) == doctest::Approx(0.0));

  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0}), DimensionError);
}

TEST_CASE("rng determinism and child streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42);
  Rng c0 = c.child(std::uint64_t{0});
  Rng c1 = c.child(std::uint64_t{1});
  CHECK(c0.next_u64() != c1.next_u64());
  // children derive from the seed, not the stream position
  c.next_u64();
  CHECK(c.child(std::uint64_t{0}).next_u64() == Rng(42).child(std::uint64_t{0}).next_u64());

  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("readout pooling") {
  Matrix h(2, 2, {1, 2, 3, 4});
  Matrix mean = readout(h, ReadoutKind::mean);
  CHECK(mean(0, 0) == doctest::Approx(2));
  CHECK(mean(0, 1) == doctest::Approx(3));
  Matrix mx = readout(h, ReadoutKind::max);
  CHECK(mx(0, 0) == doctest::Approx(3));
  CHECK(mx(0, 1) == doctest::Approx(4));
  Matrix sum = readout(h, ReadoutKind::sum);
  CHECK(sum(0, 0) == doctest::Approx(4));
  CHECK(sum(0, 1) == doctest::Approx(6));

  Matrix single(1, 3, {5, 6, 7});
  for (auto kind : {ReadoutKind::mean, ReadoutKind::sum, ReadoutKind::max}) {
    Matrix r = readout(single, kind);
    CHECK(r(0, 0) == doctest::Approx(5));
    CHECK(r(0, 2) == doctest::Approx(7));
  }

  // identical rows pool to that row exactly under mean
  Matrix rows(4, 2, {1.5, -2.5, 1.5, -2.5, 1.5, -2.5, 1.5, -2.5});
  Matrix m = readout(rows, ReadoutKind::mean);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(0, 1) == -2.5);
}

TEST_CASE("least squares closed form") {
  Rng rng(11);
  SUBCASE("invertible square solves exactly") {
    Matrix h = randn(4, 4, rng);
    Matrix y = randn(4, 2, rng);
    auto ls = least_squares_closed(h, y, 0.0);
    CHECK(ls.residual == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("hand-worked two-point fit") {
    Matrix h(2, 1, {1, 1});
    Matrix y(2, 1, {0, 2});
    auto ls = least_squares_closed(h, y, 0.0);
    CHECK(ls.w(0, 0) == doctest::Approx(1.0));
    CHECK(ls.residual == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("huge ridge shrinks the head to zero") {
    Matrix h = randn(6, 3, rng);
    Matrix y = randn(6, 2, rng);
    auto ls = least_squares_closed(h, y, 1e12);
    CHECK(ls.w.max_abs() < 1e-9);
    CHECK(ls.residual == doctest::Approx(y.frobenius()).epsilon(1e-9));
  }
  SUBCASE("singular normal matrix raises") {
    Matrix h(3, 2, {1, 2, 2, 4, 3, 6});  // second column = 2 * first
    Matrix y(3, 1, {1, 2, 3});
    CHECK_THROWS_AS(least_squares_closed(h, y, 0.0), SingularityError);
    CHECK_NOTHROW(least_squares_closed(h, y, 1e-6));
  }
}

TEST_CASE("linear head fit") {
  SUBCASE("identity target is exactly representable") {
    Matrix h = Matrix::identity(4);
    SquaredNormObjective obj(Matrix::identity(4));
    OptimizerConfig opts;
    opts.learning_rate = 0.01;
    opts.epochs = 500;
    HeadFit fit = linear_head_fit(h, obj, 4, opts, Rng(0));
    CHECK(fit.final_loss < 1e-4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(std::fabs(fit.w(i, j) - (i == j ? 1.0 : 0.0)) < 1e-2);
  }
  SUBCASE("random instance reaches the closed-form optimum within 1%") {
    Rng rng(7);
    Matrix h = randn(8, 3, rng);
    Matrix y = randn(8, 2, rng);
    auto ls = least_squares_closed(h, y, 0.0);
    SquaredNormObjective obj(y);
    OptimizerConfig opts;
    opts.learning_rate = 0.01;
    opts.epochs = 2000;
    HeadFit fit = linear_head_fit(h, obj, 2, opts, Rng(1));
    CHECK(fit.final_loss == doctest::Approx(ls.residual).epsilon(0.01));
    CHECK(ls.residual <= fit.final_loss + 1e-6);
  }
  SUBCASE("zero input cannot move the prediction") {
    Matrix h(5, 3, 0.0);
    Rng rng(3);
    Matrix y = randn(5, 2, rng);
    SquaredNormObjective obj(y);
    OptimizerConfig opts;
    opts.epochs = 50;
    HeadFit fit = linear_head_fit(h, obj, 2, opts, Rng(2));
    CHECK(fit.final_loss == doctest::Approx(y.frobenius()));
  }
  SUBCASE("divergence names the epoch") {
    Matrix h = Matrix::identity(3);
    SquaredNormObjective obj(Matrix::identity(3));
    OptimizerConfig opts;
    opts.kind = OptimizerKind::sgd;
    opts.learning_rate = 1e200;
    opts.epochs = 50;
    try {
      linear_head_fit(h, obj, 3, opts, Rng(0));
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
  SUBCASE("gradients match finite differences on random 5x4 instances") {
    Rng rng(19);
    for (int t = 0; t < 5; ++t) {
      Matrix h = randn(5, 4, rng);
      Matrix y = randn(5, 2, rng);
      Matrix w = randn(4, 2, rng);
      SquaredNormObjective obj(y);
      Matrix dz;
      obj.objective(matmul(h, w), nullptr, &dz, nullptr);
      Matrix dw = matmul_tn(h, dz);
      auto eval = [&]() { return obj.objective(matmul(h, w), nullptr, nullptr, nullptr); };
      auto r = check_gradient(eval, w.data(), dw.data());
      CHECK(r.max_err <= 1e-4);
    }
  }
}

TEST_CASE("sgd optimizer also trains") {
  Matrix h = Matrix::identity(3);
  SquaredNormObjective obj(Matrix::identity(3));
  OptimizerConfig opts;
  opts.kind = OptimizerKind::sgd;
  opts.learning_rate = 0.05;
  opts.epochs = 800;
  HeadFit fit = linear_head_fit(h, obj, 3, opts, Rng(4));
  CHECK(fit.final_loss < 1e-3);
}

TEST_CASE("optimizer config validation") {
  OptimizerConfig o;
  o.learning_rate = 0.0;
  CHECK_THROWS_AS(o.validate(), ParamError);
  o.learning_rate = 0.1;
  o.epochs = 0;
  CHECK_THROWS_AS(o.validate(), ParamError);
}

TEST_CASE("pca projection") {
  SUBCASE("rank-1 data reconstructs exactly") {
    Rng rng(5);
    Matrix base = randn(1, 6, rng);
    Matrix x(10, 6);
    for (int i = 0; i < 10; ++i) {
      double c = rng.normal();
      for (int j = 0; j < 6; ++j) x(i, j) = c * base(0, j);
    }
    Matrix proj = pca_project(x, 1);
    Matrix dirs = pca_directions(x, 1);
    Matrix recon = matmul_nt(proj, dirs.transposed());
    auto mu = col_means(x);
    Matrix centered = x;
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 6; ++j) centered(i, j) -= mu[j];
    CHECK(frobenius_distance(recon, centered) < 1e-8);
  }
  SUBCASE("matches an independent eigen-oracle") {
    Rng rng(3);
    Matrix x = randn(10, 5, rng);
    Matrix proj = pca_project(x, 3);
    Matrix oracle = power_iteration_projection(x, 3);
    CHECK(frobenius_distance(proj, oracle) < 1e-6);
  }
  SUBCASE("full rank preserves centered variance") {
    Rng rng(9);
    Matrix x = randn(8, 4, rng);
    Matrix proj = pca_project(x, 4);
    auto mu = col_means(x);
    double var = 0.0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 4; ++j) var += (x(i, j) - mu[j]) * (x(i, j) - mu[j]);
    double pvar = 0.0;
    for (double v : proj.data()) pvar += v * v;
    CHECK(pvar == doctest::Approx(var).epsilon(1e-8));
  }
  SUBCASE("projection is idempotent in its own subspace") {
    Rng rng(13);
    Matrix x = randn(12, 5, rng);
    Matrix t = pca_project(x, 3);
    Matrix again = pca_project(t, 3);
    CHECK(frobenius_distance(t, again) < 1e-10);
  }
  SUBCASE("rank bounds enforced") {
    Rng rng(1);
    Matrix x = randn(4, 3, rng);
    CHECK_THROWS_AS(pca_project(x, 0), ParamError);
    CHECK_THROWS_AS(pca_project(x, 4), ParamError);
  }
}

TEST_CASE("zscore columns") {
  Matrix m(4, 2, {1, 5, 2, 5, 3, 5, 4, 5});
  Matrix z = zscore_columns(m);
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < 4; ++i) mean += z(i, 0);
  mean /= 4;
  for (int i = 0; i < 4; ++i) var += (z(i, 0) - mean) * (z(i, 0) - mean);
  var /= 4;
  CHECK(std::fabs(mean) < 1e-10);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-10);
  for (int i = 0; i < 4; ++i) CHECK(z(i, 1) == 0.0);  // constant column guard
}

TEST_CASE("eigen symmetric on a known matrix") {
  Matrix s(2, 2, {2, 1, 1, 2});
  EigenSym e = eigen_symmetric(s);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
}
