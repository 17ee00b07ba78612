#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tcm/errors.hpp"
#include "tcm/graph.hpp"
#include "tcm/linalg.hpp"
#include "tcm/tasks.hpp"

using namespace tcm;

namespace {

Matrix randn(int r, int c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = scale * rng.normal();
  return m;
}

Graph path3() {
  Graph g;
  g.n_nodes = 3;
  g.edges = {{0, 1}, {1, 2}};
  g.features = Matrix(3, 2, {1, 0, 0, 1, 1, 1});
  g.name = "p3";
  return g;
}

Graph two_triangles() {
  Graph g;
  g.n_nodes = 6;
  g.edges = {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}};
  g.features = Matrix(6, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0, 0, 1, 1, 1, 0, 1});
  g.name = "two-triangles";
  return g;
}

ArtifactConfig small_cfg() {
  ArtifactConfig c;
  c.clusters = 2;
  c.subgraph_size = 3;
  c.embed_dim = 2;
  return c;
}

}  // namespace

TEST_CASE("task registry") {
  CHECK(task_from_string("gae") == TaskId::gae);
  CHECK(task_name(TaskId::discluster) == "discluster");
  CHECK(base_tasks().size() == 8);
  CHECK(all_tasks().size() == 9);
  try {
    task_from_string("grace");
    FAIL("expected config error");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("grace") != std::string::npos);
    CHECK(msg.find("graphcomp") != std::string::npos);  // lists valid ids
  }
  CHECK(category_name(task_spec(TaskId::dgi).category) == "CB");
  CHECK(category_name(task_spec(TaskId::gae).category) == "SB");
}

TEST_CASE("corrupt features") {
  Matrix x(3, 2, {1, 2, 3, 4, 5, 6});
  SUBCASE("identity permutation is a no-op") {
    Matrix y = corrupt_features(x, {0, 1, 2});
    CHECK(frobenius_distance(x, y) == 0.0);
  }
  SUBCASE("rows are preserved as a multiset and inverses cancel") {
    std::vector<int> perm{2, 0, 1};
    Matrix y = corrupt_features(x, perm);
    CHECK(y(0, 0) == 5);
    CHECK(y(1, 0) == 1);
    std::vector<int> inv(3);
    for (int i = 0; i < 3; ++i) inv[perm[i]] = i;
    Matrix z = corrupt_features(y, inv);
    // applying the inverse first then perm recovers x
    Matrix back = corrupt_features(corrupt_features(x, inv), perm);
    CHECK(frobenius_distance(back, x) == 0.0);
    (void)z;
  }
}

TEST_CASE("degree target z-scores with population variance") {
  Graph g = path3();
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(1));
  LossEvaluator ev = build_target(TaskId::nodeprop, g, art);
  const Matrix& y = ev.target();
  REQUIRE(y.rows() == 3);
  CHECK(y(0, 0) == doctest::Approx(-0.7071).epsilon(1e-3));
  CHECK(y(1, 0) == doctest::Approx(1.4142).epsilon(1e-3));
  CHECK(y(2, 0) == doctest::Approx(-0.7071).epsilon(1e-3));
}

TEST_CASE("complete graph leaves the adjacency loss without negatives") {
  Graph g;
  g.n_nodes = 3;
  g.edges = {{0, 1}, {0, 2}, {1, 2}};
  g.features = Matrix(3, 2, 1.0);
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(2));
  CHECK(art.negative_edges.empty());
  LossEvaluator ev = build_target(TaskId::gae, g, art);
  Rng rng(3);
  Matrix h = randn(3, 2, rng);
  Matrix w = Matrix::identity(2);
  double loss = eval_loss(ev, h, w);
  CHECK(loss > 0.0);
  CHECK(std::isfinite(loss));
}

TEST_CASE("cluster distances are z-scored bfs hops with a diameter sentinel") {
  Graph g = two_triangles();
  ArtifactConfig cfg = small_cfg();
  cfg.clusters = 2;
  FrozenArtifacts art = freeze_artifacts(g, cfg, Rng(4));
  REQUIRE(art.cluster_centers.size() == 2);
  LossEvaluator ev = build_target(TaskId::discluster, g, art);

  // Raw distances, built by brute force: to the own-triangle center 0 or 1,
  // to the other 2 (= diameter + 1).
  Matrix raw(6, 2);
  for (int c = 0; c < 2; ++c) {
    auto dist = bfs_distances(g, art.cluster_centers[c]);
    for (int i = 0; i < 6; ++i) raw(i, c) = dist[i] < 0 ? 2 : dist[i];
  }
  for (int i = 0; i < 6; ++i)
    for (int c = 0; c < 2; ++c) CHECK((raw(i, c) == 0 || raw(i, c) == 1 || raw(i, c) == 2));
  CHECK(frobenius_distance(ev.target(), zscore_columns(raw)) < 1e-12);
}

TEST_CASE("mean bce fixtures") {
  CHECK(bce_mean({0.5, 0.5, 0.5}, {1, 0, 1}) == doctest::Approx(std::log(2.0)));
  // perfectly separated scores collapse to the clamp floor
  CHECK(bce_mean({1.0, 1.0, 0.0}, {1, 1, 0}) < 1e-6);
  CHECK_THROWS_AS(bce_mean({}, {}), DimensionError);
}

TEST_CASE("regression losses are exact frobenius norms") {
  Graph g = two_triangles();
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(5));
  for (TaskId task : {TaskId::graphcomp, TaskId::attributemask, TaskId::nodeprop,
                      TaskId::discluster, TaskId::pairattsim}) {
    LossEvaluator ev = build_target(task, g, art);
    Rng rng(6);
    Matrix h = randn(6, 3, rng);
    Matrix phi = ev.features(h);
    Matrix w = randn(3, ev.head_cols(3), rng);
    double loss = eval_loss(ev, h, w);
    CHECK(loss == doctest::Approx(frobenius_distance(matmul(phi, w), ev.target())).epsilon(1e-12));
  }
}

TEST_CASE("perfect prediction scores zero") {
  Graph g = path3();
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(7));
  LossEvaluator ev = build_target(TaskId::nodeprop, g, art);
  Matrix h = ev.target();  // N x 1 target used as the representation
  Matrix w = Matrix::identity(1);
  CHECK(eval_loss(ev, h, w) == doctest::Approx(0.0));
}

TEST_CASE("evaluators are deterministic over repeated evaluation") {
  Graph g = two_triangles();
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(8));
  Rng rng(9);
  Matrix h = randn(6, 4, rng);
  for (TaskId task : all_tasks()) {
    LossEvaluator ev = build_target(task, g, art);
    Matrix w = randn(ev.features(h).cols(), ev.head_cols(4), rng, 0.5);
    Matrix aux;
    Matrix* aux_p = nullptr;
    if (ev.aux_rows(ev.head_cols(4)) > 0) {
      aux = randn(ev.aux_rows(ev.head_cols(4)), ev.aux_cols(ev.head_cols(4)), rng, 0.5);
      aux_p = &aux;
    }
    double first = eval_loss(ev, h, w, aux_p);
    for (int i = 0; i < 100; ++i) CHECK(eval_loss(ev, h, w, aux_p) == first);
  }
}

TEST_CASE("prediction invariance under compensated scaling") {
  Graph g = two_triangles();
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(10));
  Rng rng(11);
  Matrix h = randn(6, 4, rng);
  const double c = 3.7;
  Matrix hc = h;
  hc.scale(c);

  for (TaskId task : all_tasks()) {
    LossEvaluator ev = build_target(task, g, art);
    int hc_cols = ev.head_cols(4);
    Matrix w = randn(ev.features(h).cols(), hc_cols, rng, 0.5);
    Matrix aux;
    Matrix* aux_p = nullptr;
    if (ev.aux_rows(hc_cols) > 0) {
      aux = randn(hc_cols, hc_cols, rng, 0.5);
      aux_p = &aux;
    }
    // pair featurizations square the representation, so the head compensates
    // with 1/c^2; plain featurizations with 1/c
    bool pair_feat = task == TaskId::edgemask || task == TaskId::pairattsim;
    Matrix w_comp = w;
    w_comp.scale(pair_feat ? 1.0 / (c * c) : 1.0 / c);
    CHECK(eval_loss(ev, h, w, aux_p) ==
          doctest::Approx(eval_loss(ev, hc, w_comp, aux_p)).epsilon(1e-9));
  }
}

TEST_CASE("z-scored targets have unit population sd per column") {
  Graph g = synth_sbm({3, 6, 0.5, 0.1, 4, 0.4}, Rng(12));
  FrozenArtifacts art = freeze_artifacts(g, {}, Rng(13));
  for (TaskId task : {TaskId::graphcomp, TaskId::attributemask, TaskId::nodeprop,
                      TaskId::discluster, TaskId::pairattsim}) {
    LossEvaluator ev = build_target(task, g, art);
    const Matrix& y = ev.target();
    for (int c = 0; c < y.cols(); ++c) {
      double mean = 0.0;
      for (int i = 0; i < y.rows(); ++i) mean += y(i, c);
      mean /= y.rows();
      double var = 0.0;
      for (int i = 0; i < y.rows(); ++i) var += (y(i, c) - mean) * (y(i, c) - mean);
      var /= y.rows();
      CHECK(std::fabs(mean) < 1e-10);
      bool constant = var < 1e-20;
      if (!constant) CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("head widths follow the task form") {
  Graph g = two_triangles();
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(), Rng(14));
  CHECK(build_target(TaskId::graphcomp, g, art).head_cols(4) == 3);   // feature dim
  CHECK(build_target(TaskId::nodeprop, g, art).head_cols(4) == 1);
  CHECK(build_target(TaskId::discluster, g, art).head_cols(4) == 2);  // cluster count
  CHECK(build_target(TaskId::edgemask, g, art).head_cols(4) == 1);
  CHECK(build_target(TaskId::gae, g, art).head_cols(4) == 4);
  CHECK(build_target(TaskId::dgi, g, art).head_cols(4) == 4);
  CHECK(build_target(TaskId::dgi, g, art).aux_rows(4) == 4);
  CHECK(build_target(TaskId::subgcon, g, art).head_cols(4) == 4);
}
