#include <benchmark/benchmark.h>

#include "tcm/correlation.hpp"
#include "tcm/encoder.hpp"
#include "tcm/linalg.hpp"
#include "tcm/tcm_model.hpp"

using namespace tcm;

namespace {

Matrix randn(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = rng.normal();
  return m;
}

struct BenchFixture {
  Graph g;
  FrozenArtifacts artifacts;
  Matrix a_hat;
  BenchFixture() {
    g = synth_sbm({5, 12, 0.3, 0.02, 16, 0.5}, Rng(1));
    ArtifactConfig cfg;
    cfg.embed_dim = 32;
    artifacts = freeze_artifacts(g, cfg, Rng(2));
    a_hat = normalize_adjacency(g);
  }
};

BenchFixture& fixture() {
  static BenchFixture f;
  return f;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Rng rng(3);
  Matrix a = randn(n, n, rng);
  Matrix b = randn(n, n, rng);
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_EncodeForward(benchmark::State& state) {
  auto& f = fixture();
  EncoderConfig arch = default_encoder_config(TaskId::gae, 32);
  Rng rng(4);
  EncoderParams params = init_encoder(arch, f.g.feat_dim(), rng);
  for (auto _ : state) {
    Matrix h = encode(params, f.a_hat, f.g.features);
    benchmark::DoNotOptimize(h.data().data());
  }
}
BENCHMARK(BM_EncodeForward);

static void BM_TrainEpochBudget(benchmark::State& state) {
  auto& f = fixture();
  EncoderConfig arch = default_encoder_config(TaskId::nodeprop, 32);
  OptimizerConfig opts = default_optimizer_config(TaskId::nodeprop);
  opts.epochs = static_cast<int>(state.range(0));
  for (auto _ : state) {
    TrainResult r = train_ssl(TaskId::nodeprop, f.g, f.artifacts, arch, opts, Rng(5));
    benchmark::DoNotOptimize(r.final_loss);
  }
}
BENCHMARK(BM_TrainEpochBudget)->Arg(50)->Arg(200);

static void BM_HeadFit(benchmark::State& state) {
  auto& f = fixture();
  LossEvaluator ev = build_target(TaskId::nodeprop, f.g, f.artifacts);
  Rng rng(6);
  Matrix h = randn(f.g.n_nodes, 32, rng);
  OptimizerConfig opts;
  opts.epochs = 300;
  for (auto _ : state) {
    HeadFit fit = fit_head(ev, h, opts, Rng(7));
    benchmark::DoNotOptimize(fit.final_loss);
  }
}
BENCHMARK(BM_HeadFit);

static void BM_TcmForward(benchmark::State& state) {
  Rng rng(8);
  TcmModel m;
  m.d = 32;
  m.d_prime = 16;
  m.w_r = randn(32, 16, rng);
  m.w_t = randn(32, 16, rng);
  Matrix a = randn(60, 32, rng);
  Matrix b = randn(60, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tcm_forward(m, a, b));
}
BENCHMARK(BM_TcmForward);

BENCHMARK_MAIN();
