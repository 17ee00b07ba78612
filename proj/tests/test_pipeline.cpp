#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tcm/config.hpp"
#include "tcm/correlation.hpp"
#include "tcm/errors.hpp"
#include "tcm/pipeline.hpp"

using namespace tcm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "tcmlab_pipeline_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Small, fast synthetic run: 3 tasks, 24 nodes, trimmed budgets.
std::string tiny_config(const std::string& out_dir, int seed = 1) {
  return std::string(R"({
    "seed": )") + std::to_string(seed) + R"(,
    "dataset": {"kind": "synthetic-sbm", "blocks": 3, "nodes_per_block": 8,
                "p_in": 0.4, "p_out": 0.05, "feat_dim": 6, "noise": 0.4},
    "tasks": ["nodeprop", "gae", "graphcomp"],
    "embed_dim": 8,
    "artifacts": {"clusters": 2, "subgraph_size": 4},
    "task_overrides": {
      "nodeprop": {"epochs": 40},
      "gae": {"epochs": 40},
      "graphcomp": {"epochs": 40}
    },
    "correlation": {"epochs": 60, "learning_rate": 0.01},
    "tcm": {"epochs": 300, "learning_rate": 0.02, "split_frac": 0.7},
    "enhance": {"epochs": 100},
    "evaluate": {"seeds": 2, "epochs": 60, "learning_rate": 0.01},
    "out_dir": ")" + out_dir + R"("
  })";
}

}  // namespace

TEST_CASE("minimal config resolves every default") {
  RunConfig cfg = parse_config_text(R"({"dataset": "synthetic-sbm", "seed": 1})");
  CHECK(cfg.seed == 1);
  CHECK(cfg.tasks.size() == 8);  // the base tasks, hold-out excluded
  CHECK(cfg.embed_dim == 32);
  CHECK(cfg.dataset.kind == DatasetKind::sbm);
  CHECK(cfg.dataset.sbm.blocks == 5);
  CHECK(cfg.dataset.sbm.nodes_per_block == 12);
  CHECK(cfg.task_settings.at(TaskId::graphcomp).opts.epochs == 500);
  CHECK(cfg.task_settings.at(TaskId::graphcomp).opts.learning_rate == doctest::Approx(0.008));
  CHECK(cfg.task_settings.at(TaskId::gae).arch.n_gcn == 2);
  CHECK(cfg.correlation_opts.learning_rate == doctest::Approx(0.001));
  CHECK(cfg.correlation_opts.weight_decay == doctest::Approx(0.0005));
  CHECK(cfg.correlation_opts.epochs == 300);
  CHECK(cfg.tcm.split_frac == doctest::Approx(0.7));
  CHECK(cfg.evaluate.n_seeds == 5);
}

TEST_CASE("config rejects bad input") {
  SUBCASE("missing seed") {
    CHECK_THROWS_AS(parse_config_text(R"({"dataset": "synthetic-sbm"})"), ConfigError);
  }
  SUBCASE("unknown top-level key") {
    CHECK_THROWS_AS(parse_config_text(R"({"seed": 1, "daataset": "synthetic-sbm"})"), ConfigError);
  }
  SUBCASE("invalid task id lists the valid ones") {
    try {
      parse_config_text(R"({"seed": 1, "tasks": ["grace"]})");
      FAIL("expected config error");
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      CHECK(msg.find("grace") != std::string::npos);
      CHECK(msg.find("subgcon") != std::string::npos);
    }
  }
  SUBCASE("unknown nested key") {
    CHECK_THROWS_AS(parse_config_text(R"({"seed": 1, "tcm": {"splitfrac": 0.5}})"), ConfigError);
  }
  SUBCASE("override for an unlisted task") {
    CHECK_THROWS_AS(
        parse_config_text(R"({"seed": 1, "tasks": ["gae"], "task_overrides": {"dgi": {"epochs": 5}}})"),
        ConfigError);
  }
}

TEST_CASE("resolved config round trips byte-for-byte") {
  RunConfig cfg = parse_config_text(tiny_config("/tmp/unused"));
  std::string emitted = config_to_json(cfg);
  RunConfig back = parse_config_text(emitted);
  CHECK(config_to_json(back) == emitted);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("correlate without persisted representations exits with a usage error") {
  fs::path dir = fresh_dir("deps");
  RunConfig cfg = parse_config_text(tiny_config(dir.string()));
  CHECK(run_pipeline(cfg, {Stage::correlate}) == 2);
}

TEST_CASE("full tiny pipeline produces every artifact") {
  fs::path dir = fresh_dir("full");
  RunConfig cfg = parse_config_text(tiny_config(dir.string()));
  int rc = run_pipeline(cfg, {Stage::train, Stage::correlate, Stage::tcm, Stage::enhance,
                              Stage::evaluate});
  REQUIRE(rc == 0);
  for (const char* f : {"resolved_config.json", "artifacts.json", "cor.json", "cor.csv",
                        "tcm.json", "tcm_report.json", "enhanced.json", "results.csv",
                        "results.json", "manifest.json"})
    CHECK(fs::exists(dir / f));
  CHECK(fs::exists(dir / "reps" / "nodeprop.json"));

  SUBCASE("report emits heatmap and rankings") {
    emit_report(dir.string());
    CHECK(fs::exists(dir / "cor_heatmap.csv"));
    CHECK(fs::exists(dir / "stats.csv"));
    CHECK(fs::exists(dir / "summary.json"));

    std::string stats = slurp(dir / "stats.csv");
    int lines = 0;
    for (char c : stats)
      if (c == '\n') ++lines;
    CHECK(lines == 4);  // header + one row per task

    std::string heat = slurp(dir / "cor_heatmap.csv");
    CHECK(heat.find("train\\eval,nodeprop,gae,graphcomp") == 0);
  }

  SUBCASE("restarting a stage reproduces identical artifacts") {
    std::string cor_before = slurp(dir / "cor.json");
    REQUIRE(run_pipeline(cfg, {Stage::correlate}) == 0);
    CHECK(slurp(dir / "cor.json") == cor_before);
  }

  SUBCASE("results carry every method") {
    std::string results = slurp(dir / "results.csv");
    for (const char* m : {"nodeprop", "gae", "graphcomp", "addition", "concat", "multi-loss",
                          "tcm-enhanced"})
      CHECK(results.find(m) != std::string::npos);
    CHECK(results.find("accuracy") != std::string::npos);
    CHECK(results.find("roc_auc") != std::string::npos);
  }
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
  fs::path a = fresh_dir("det_a");
  fs::path b = fresh_dir("det_b");
  RunConfig ca = parse_config_text(tiny_config(a.string(), 7));
  RunConfig cb = parse_config_text(tiny_config(b.string(), 7));
  std::set<Stage> stages{Stage::train, Stage::correlate, Stage::tcm, Stage::enhance};
  REQUIRE(run_pipeline(ca, stages) == 0);
  REQUIRE(run_pipeline(cb, stages) == 0);
  for (const char* f : {"cor.json", "tcm.json", "enhanced.json"})
    CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("report on a hand-built matrix honors tie-break order") {
  fs::path dir = fresh_dir("report_only");
  CorrelationMatrix cm;
  cm.tasks = {TaskId::gae, TaskId::dgi, TaskId::nodeprop};
  cm.values = Matrix(3, 3, 1.0);  // all ties
  cm.denominators = {1, 1, 1};
  save_correlation(cm, (dir / "cor.json").string());
  emit_report(dir.string());
  std::string stats = slurp(dir / "stats.csv");
  // ties resolve by task order, so ranks follow the listing
  CHECK(stats.find("gae,1,1,1,1") != std::string::npos);
  CHECK(stats.find("dgi,1,2,1,2") != std::string::npos);
  CHECK(stats.find("nodeprop,1,3,1,3") != std::string::npos);
}

TEST_CASE("report without a matrix is a dependency error") {
  fs::path dir = fresh_dir("report_missing");
  CHECK_THROWS_AS(emit_report(dir.string()), DependencyError);
}

TEST_CASE("stage parsing") {
  auto stages = parse_stage_list("train,correlate");
  CHECK(stages.size() == 2);
  CHECK(stages[0] == Stage::train);
  CHECK_THROWS_AS(parse_stage_list("trian"), ConfigError);
  CHECK_THROWS_AS(parse_stage_list(""), ConfigError);
}

TEST_CASE("manifest checksums are stable across reruns") {
  fs::path dir = fresh_dir("manifest");
  RunConfig cfg = parse_config_text(tiny_config(dir.string(), 3));
  REQUIRE(run_pipeline(cfg, {Stage::train}) == 0);
  std::string first = slurp(dir / "manifest.json");
  REQUIRE(run_pipeline(cfg, {Stage::train}) == 0);
  CHECK(slurp(dir / "manifest.json") == first);
}

TEST_CASE("atomic write and checksum helpers") {
  fs::path dir = fresh_dir("atomic");
  atomic_write((dir / "x.txt").string(), "hello");
  CHECK(slurp(dir / "x.txt") == "hello");
  CHECK(!fs::exists(dir / "x.txt.tmp"));
  CHECK(checksum_file((dir / "x.txt").string()) == fnv1a_hex("hello"));
}
