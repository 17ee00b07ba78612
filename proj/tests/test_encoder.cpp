#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tcm/encoder.hpp"
#include "tcm/errors.hpp"
#include "tcm/verify.hpp"

using namespace tcm;

namespace {

Graph complete_graph(int n, int f) {
  Graph g;
  g.n_nodes = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
  g.features = Matrix(n, f);
  Rng rng(99);
  for (auto& x : g.features.data()) x = rng.normal();
  g.name = "k" + std::to_string(n);
  return g;
}

ArtifactConfig small_cfg(int d) {
  ArtifactConfig c;
  c.clusters = 2;
  c.subgraph_size = 3;
  c.embed_dim = d;
  return c;
}

}  // namespace

TEST_CASE("encode applies layers in order") {
  SUBCASE("identity linear layer passes features through") {
    EncoderParams p;
    EncoderLayer l;
    l.kind = LayerKind::linear;
    l.w = Matrix::identity(3);
    l.b.assign(3, 0.0);
    l.act = Activation::none;
    p.layers.push_back(l);
    p.embed_dim = 3;

    Matrix x(2, 3, {1, 2, 3, 4, 5, 6});
    Matrix a = Matrix::identity(2);
    Matrix h = encode(p, a, x);
    CHECK(frobenius_distance(h, x) == 0.0);
  }
  SUBCASE("gcn layer on a single self-looped node is a plain affine map") {
    EncoderParams p;
    EncoderLayer l;
    l.kind = LayerKind::gcn;
    l.w = Matrix(2, 2, {1, 2, 3, 4});
    l.b = {0.5, -0.5};
    l.act = Activation::relu;
    p.layers.push_back(l);
    p.embed_dim = 2;

    Matrix x(1, 2, {1, 1});
    Matrix a(1, 1, {1.0});
    Matrix h = encode(p, a, x);
    CHECK(h(0, 0) == doctest::Approx(std::max(0.0, 1 * 1 + 1 * 3 + 0.5)));
    CHECK(h(0, 1) == doctest::Approx(std::max(0.0, 1 * 2 + 1 * 4 - 0.5)));
  }
  SUBCASE("relu clamps all-negative pre-activations to zero") {
    EncoderParams p;
    EncoderLayer l;
    l.kind = LayerKind::linear;
    l.w = Matrix::identity(2);
    l.b = {-10.0, -10.0};
    l.act = Activation::relu;
    p.layers.push_back(l);
    p.embed_dim = 2;
    Matrix x(3, 2, {1, 2, 3, 4, 5, 6});
    Matrix h = encode(p, Matrix::identity(3), x);
    CHECK(h.frobenius() == 0.0);
  }
  SUBCASE("dimension mismatch raises") {
    EncoderParams p;
    EncoderLayer l;
    l.kind = LayerKind::linear;
    l.w = Matrix::identity(3);
    l.b.assign(3, 0.0);
    p.layers.push_back(l);
    p.embed_dim = 3;
    Matrix x(2, 2, 1.0);
    CHECK_THROWS_AS(encode(p, Matrix::identity(2), x), DimensionError);
  }
}

TEST_CASE("constant-degree graph drives the degree task to near-zero loss") {
  Graph g = complete_graph(4, 3);  // 3-regular
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(4), Rng(1));
  EncoderConfig arch = default_encoder_config(TaskId::nodeprop, 4);
  OptimizerConfig opts = default_optimizer_config(TaskId::nodeprop);
  TrainResult r = train_ssl(TaskId::nodeprop, g, art, arch, opts, Rng(2));
  CHECK(r.final_loss < 1e-3);
}

TEST_CASE("representation dims follow the configured embedding width") {
  Graph g = synth_sbm({2, 6, 0.5, 0.1, 5, 0.3}, Rng(3));
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(8), Rng(4));
  for (TaskId task : {TaskId::graphcomp, TaskId::gae, TaskId::dgi}) {
    EncoderConfig arch = default_encoder_config(task, 8);
    OptimizerConfig opts = default_optimizer_config(task);
    opts.epochs = 30;
    TrainResult r = train_ssl(task, g, art, arch, opts, Rng(5));
    CHECK(r.rep.matrix.rows() == g.n_nodes);
    CHECK(r.rep.matrix.cols() == 8);  // the head never leaks into the output
    CHECK(r.rep.task == task_name(task));
  }
}

TEST_CASE("training is deterministic under a fixed seed") {
  Graph g = synth_sbm({2, 5, 0.6, 0.1, 4, 0.3}, Rng(6));
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(4), Rng(7));
  EncoderConfig arch = default_encoder_config(TaskId::gae, 4);
  OptimizerConfig opts = default_optimizer_config(TaskId::gae);
  opts.epochs = 40;
  TrainResult a = train_ssl(TaskId::gae, g, art, arch, opts, Rng(8));
  TrainResult b = train_ssl(TaskId::gae, g, art, arch, opts, Rng(8));
  CHECK(representation_to_json(a.rep) == representation_to_json(b.rep));
}

TEST_CASE("training loss does not end above its starting point") {
  Graph g = synth_sbm({2, 6, 0.5, 0.1, 4, 0.4}, Rng(9));
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(4), Rng(10));
  for (TaskId task : all_tasks()) {
    EncoderConfig arch = default_encoder_config(task, 4);
    OptimizerConfig opts = default_optimizer_config(task);
    opts.epochs = std::min(opts.epochs, 60);
    TrainResult r = train_ssl(task, g, art, arch, opts, Rng(11));
    REQUIRE(!r.loss_curve.empty());
    CHECK(r.loss_curve.back() <= r.loss_curve.front() + 1e-9);
  }
}

TEST_CASE("early stopping halts a stalled infomax run") {
  Graph g = synth_sbm({2, 5, 0.6, 0.1, 4, 0.3}, Rng(12));
  FrozenArtifacts art = freeze_artifacts(g, small_cfg(4), Rng(13));
  EncoderConfig arch = default_encoder_config(TaskId::dgi, 4);
  CHECK(arch.early_stop);
  OptimizerConfig opts = default_optimizer_config(TaskId::dgi);
  TrainResult r = train_ssl(TaskId::dgi, g, art, arch, opts, Rng(14));
  CHECK(r.epochs_run <= opts.epochs);  // usually stops well before the cap
}

TEST_CASE("encoder backprop matches finite differences") {
  // two quick trials here; the acceptance suite runs the full 50
  SuiteReport r = run_suite(SuiteKind::gradients, 2, Rng(15));
  for (const auto& f : r.failures) MESSAGE(f.what);
  CHECK(r.ok());
}

TEST_CASE("representation json round trip") {
  Representation rep;
  rep.matrix = Matrix(2, 3, {1.5, -2.25, 3.125, 0.0, 1e-17, 42.0});
  rep.task = "gae";
  rep.seed = 123456789ULL;
  rep.dataset = "toy";
  Representation back = representation_from_json(representation_to_json(rep));
  CHECK(representation_to_json(back) == representation_to_json(rep));
  CHECK(back.matrix(1, 1) == rep.matrix(1, 1));
}

TEST_CASE("per-task defaults mirror the published table") {
  EncoderConfig gc = default_encoder_config(TaskId::graphcomp, 32);
  CHECK(gc.n_gcn == 0);
  CHECK(gc.n_linear == 3);
  EncoderConfig gae = default_encoder_config(TaskId::gae, 32);
  CHECK(gae.n_gcn == 2);
  CHECK(gae.n_linear == 0);
  CHECK(default_encoder_config(TaskId::dgi, 32).prelu);
  CHECK(default_encoder_config(TaskId::subgcon, 32).n_linear == 0);

  OptimizerConfig go = default_optimizer_config(TaskId::graphcomp);
  CHECK(go.learning_rate == doctest::Approx(0.008));
  CHECK(go.weight_decay == doctest::Approx(8e-5));
  CHECK(go.epochs == 500);
  OptimizerConfig cs = default_optimizer_config(TaskId::graphcomp, "citeseer");
  CHECK(cs.learning_rate == doctest::Approx(5e-4));
  CHECK(cs.weight_decay == doctest::Approx(0.7));
  OptimizerConfig pm = default_optimizer_config(TaskId::graphcomp, "pubmed");
  CHECK(pm.weight_decay == doctest::Approx(0.5));
  CHECK(default_optimizer_config(TaskId::subgcon).epochs == 50);
  CHECK(default_optimizer_config(TaskId::gae).learning_rate == doctest::Approx(0.01));
}
