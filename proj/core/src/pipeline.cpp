#include "tcm/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tcm/correlation.hpp"
#include "tcm/errors.hpp"
#include "tcm/probe.hpp"

namespace tcm {

namespace fs = std::filesystem;
using nlohmann::json;

Stage stage_from_string(const std::string& s) {
  if (s == "train") return Stage::train;
  if (s == "correlate") return Stage::correlate;
  if (s == "tcm") return Stage::tcm;
  if (s == "enhance") return Stage::enhance;
  if (s == "evaluate") return Stage::evaluate;
  throw ConfigError("unknown stage \"" + s + "\" (expected train, correlate, tcm, enhance, evaluate)");
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::train: return "train";
    case Stage::correlate: return "correlate";
    case Stage::tcm: return "tcm";
    case Stage::enhance: return "enhance";
    case Stage::evaluate: return "evaluate";
  }
  return "";
}

std::vector<Stage> parse_stage_list(const std::string& comma_separated) {
  std::vector<Stage> out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(stage_from_string(item));
  }
  if (out.empty()) throw ConfigError("empty stage list");
  return out;
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string checksum_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot checksum missing file " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a_hex(bytes);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing artifact: " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct PipelineContext {
  const RunConfig& cfg;
  fs::path out;
  std::string cfg_hash;

  fs::path reps_dir() const { return out / "reps"; }
  fs::path rep_path(TaskId t) const { return reps_dir() / (task_name(t) + ".json"); }

  void record_artifacts(const std::vector<std::string>& rel_paths) const {
    json manifest;
    fs::path mpath = out / "manifest.json";
    if (fs::exists(mpath)) {
      try {
        manifest = json::parse(slurp(mpath.string()));
      } catch (const json::exception&) {
        manifest = json::object();
      }
    }
    manifest["config_hash"] = cfg_hash;
    manifest["seed"] = cfg.seed;
    if (!manifest.contains("files")) manifest["files"] = json::object();
    for (const auto& rel : rel_paths)
      manifest["files"][rel] = checksum_file((out / rel).string());
    atomic_write(mpath.string(), manifest.dump(2) + "\n");
  }
};

FrozenArtifacts require_artifacts(const PipelineContext& ctx) {
  fs::path p = ctx.out / "artifacts.json";
  if (!fs::exists(p))
    throw DependencyError("artifacts.json not found in " + ctx.out.string() +
                          "; run the train stage first");
  return artifacts_from_json(slurp(p.string()));
}

std::vector<Representation> require_representations(const PipelineContext& ctx) {
  std::vector<Representation> reps;
  for (TaskId t : ctx.cfg.tasks) {
    fs::path p = ctx.rep_path(t);
    if (!fs::exists(p))
      throw DependencyError("representation for task " + task_name(t) + " not found at " +
                            p.string() + "; run the train stage first");
    reps.push_back(representation_from_json(slurp(p.string())));
  }
  return reps;
}

std::vector<LossEvaluator> build_evaluators(const RunConfig& cfg, const Graph& g,
                                            const FrozenArtifacts& artifacts) {
  std::vector<LossEvaluator> evs;
  for (TaskId t : cfg.tasks) evs.push_back(build_target(t, g, artifacts));
  return evs;
}

void stage_train(const PipelineContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  Graph g = build_dataset(cfg);
  Rng master(cfg.seed);
  FrozenArtifacts artifacts = freeze_artifacts(g, cfg.artifacts, master.child("artifacts"));

  fs::create_directories(ctx.reps_dir());
  atomic_write((ctx.out / "resolved_config.json").string(), config_to_json(cfg));
  atomic_write((ctx.out / "artifacts.json").string(), artifacts_to_json(artifacts));

  std::vector<std::string> written = {"resolved_config.json", "artifacts.json"};
  for (TaskId t : cfg.tasks) {
    const TaskSetting& s = cfg.task_settings.at(t);
    Rng task_rng = master.child(("train/" + task_name(t)).c_str());
    TrainResult r = train_ssl(t, g, artifacts, s.arch, s.opts, task_rng);
    atomic_write(ctx.rep_path(t).string(), representation_to_json(r.rep));
    written.push_back("reps/" + task_name(t) + ".json");
    std::cerr << "trained " << task_name(t) << ": " << r.epochs_run
              << " epochs, final loss " << format_double(r.final_loss) << "\n";
  }
  ctx.record_artifacts(written);
}

void stage_correlate(const PipelineContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  FrozenArtifacts artifacts = require_artifacts(ctx);
  std::vector<Representation> reps = require_representations(ctx);
  Graph g = build_dataset(cfg);
  auto evs = build_evaluators(cfg, g, artifacts);

  Rng rng = Rng(cfg.seed).child("correlate");
  std::string fingerprint = ctx.cfg_hash + "-" + std::to_string(cfg.seed);
  CorrelationMatrix cm = correlation_matrix(reps, evs, cfg.correlation_opts, rng, fingerprint);

  atomic_write((ctx.out / "cor.json").string(), correlation_to_json(cm));
  atomic_write((ctx.out / "cor.csv").string(), correlation_to_csv(cm));
  ctx.record_artifacts({"cor.json", "cor.csv"});
}

void stage_tcm(const PipelineContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  std::vector<Representation> reps = require_representations(ctx);
  fs::path cor_path = ctx.out / "cor.json";
  if (!fs::exists(cor_path))
    throw DependencyError("cor.json not found; run the correlate stage first");
  CorrelationMatrix cm = correlation_from_json(slurp(cor_path.string()));

  TcmFitOptions fo;
  fo.split_frac = cfg.tcm.split_frac;
  fo.d_prime = cfg.tcm.d_prime;
  fo.variant = cfg.tcm.variant;
  fo.squared_residual = cfg.tcm.squared_residual;
  fo.opts = cfg.tcm.opts;
  auto [model, report] = tcm_fit(reps, cm, fo, Rng(cfg.seed).child("tcm"));

  atomic_write((ctx.out / "tcm.json").string(), tcm_model_to_json(model));
  atomic_write((ctx.out / "tcm_report.json").string(), tcm_report_to_json(report));
  std::cerr << "tcm fit: train rel err " << format_double(report.train_rel_err)
            << ", val rel err " << format_double(report.val_rel_err) << "\n";
  ctx.record_artifacts({"tcm.json", "tcm_report.json"});
}

void stage_enhance(const PipelineContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  std::vector<Representation> reps = require_representations(ctx);
  fs::path cor_path = ctx.out / "cor.json";
  fs::path tcm_path = ctx.out / "tcm.json";
  if (!fs::exists(cor_path)) throw DependencyError("cor.json not found; run the correlate stage first");
  if (!fs::exists(tcm_path)) throw DependencyError("tcm.json not found; run the tcm stage first");
  CorrelationMatrix cm = correlation_from_json(slurp(cor_path.string()));
  TcmModel model = tcm_model_from_json(slurp(tcm_path.string()));

  TaskStats stats = task_stats(cm);
  EnhanceResult res = enhance(model, reps, stats.atd, cfg.enhance_opts, Rng(cfg.seed).child("enhance"));

  atomic_write((ctx.out / "enhanced.json").string(), representation_to_json(res.rep));
  json rj;
  rj["mix_weights"] = res.weights.w.data();
  rj["k"] = res.weights.w.rows();
  rj["d"] = res.weights.w.cols();
  rj["objective_curve"] = res.objective_curve;
  atomic_write((ctx.out / "enhance_report.json").string(), rj.dump(2) + "\n");
  ctx.record_artifacts({"enhanced.json", "enhance_report.json"});
}

void stage_evaluate(const PipelineContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  FrozenArtifacts artifacts = require_artifacts(ctx);
  std::vector<Representation> reps = require_representations(ctx);
  Graph g = build_dataset(cfg);
  if (!g.labels) throw ConfigError("evaluate stage needs node labels");

  Rng master(cfg.seed);
  NodeSplits splits = split_nodes(g, cfg.splits, master.child("splits"));

  std::vector<Representation> methods = reps;
  methods.push_back(baseline_addition(reps));
  methods.push_back(baseline_concat(reps));
  {
    EncoderConfig arch;
    arch.n_gcn = 1;
    arch.n_linear = 1;
    arch.embed_dim = cfg.embed_dim;
    OptimizerConfig opts;
    opts.learning_rate = 0.001;
    opts.weight_decay = 0.0005;
    opts.epochs = 200;
    methods.push_back(
        baseline_multiloss(cfg.tasks, g, artifacts, arch, opts, master.child("multiloss")).rep);
  }
  if (fs::exists(ctx.out / "enhanced.json"))
    methods.push_back(representation_from_json(slurp((ctx.out / "enhanced.json").string())));

  json results = json::array();
  std::string csv = "method,dataset,metric,value,std,n_seeds\n";
  for (const auto& rep : methods) {
    std::vector<ProbeResult> acc, auc;
    for (int s = 0; s < cfg.evaluate.n_seeds; ++s) {
      Rng probe_rng = master.child(("eval/" + rep.task + "/" + std::to_string(s)).c_str());
      acc.push_back(linear_probe_nodeclass(rep, *g.labels, splits, cfg.evaluate.opts,
                                           probe_rng.child("nodeclass")));
      auc.push_back(link_predict_auc(rep, g, artifacts, cfg.evaluate.opts, probe_rng.child("link")));
    }
    for (const ProbeResult& r : {aggregate_probes(acc), aggregate_probes(auc)}) {
      csv += rep.task + "," + g.name + "," + r.metric + "," + format_double(r.value) + "," +
             format_double(r.stddev) + "," + std::to_string(r.n_seeds) + "\n";
      json row;
      row["method"] = rep.task;
      row["dataset"] = g.name;
      row["metric"] = r.metric;
      row["value"] = r.value;
      row["std"] = r.stddev;
      row["n_seeds"] = r.n_seeds;
      results.push_back(std::move(row));
    }
  }
  atomic_write((ctx.out / "results.csv").string(), csv);
  atomic_write((ctx.out / "results.json").string(), results.dump(2) + "\n");
  ctx.record_artifacts({"results.csv", "results.json"});
}

}  // namespace

void emit_report(const std::string& artifact_dir) {
  fs::path out(artifact_dir);
  fs::path cor_path = out / "cor.json";
  if (!fs::exists(cor_path))
    throw DependencyError("cor.json not found in " + artifact_dir + "; run the correlate stage first");
  CorrelationMatrix cm = correlation_from_json(slurp(cor_path.string()));

  atomic_write((out / "cor_heatmap.csv").string(), correlation_to_csv(cm));

  TaskStats stats = task_stats(cm);
  std::string csv = "task,atd,atd_rank,arl,arl_rank\n";
  for (int i = 0; i < cm.size(); ++i)
    csv += task_name(cm.tasks[i]) + "," + format_double(stats.atd[i]) + "," +
           std::to_string(stats.atd_rank[i]) + "," + format_double(stats.arl[i]) + "," +
           std::to_string(stats.arl_rank[i]) + "\n";
  atomic_write((out / "stats.csv").string(), csv);

  json summary;
  json names = json::array();
  for (TaskId t : cm.tasks) names.push_back(task_name(t));
  summary["tasks"] = std::move(names);
  summary["atd"] = stats.atd;
  summary["atd_rank"] = stats.atd_rank;
  summary["arl"] = stats.arl;
  summary["arl_rank"] = stats.arl_rank;
  summary["denominators"] = cm.denominators;
  summary["config"] = cm.fingerprint;
  atomic_write((out / "summary.json").string(), summary.dump(2) + "\n");
}

void run_pipeline_checked(const RunConfig& cfg, const std::set<Stage>& stages) {
  PipelineContext ctx{cfg, fs::path(cfg.out_dir), config_hash(cfg)};
  fs::create_directories(ctx.out);
  // Stage order is fixed; the set only selects which ones run.
  if (stages.count(Stage::train)) stage_train(ctx);
  if (stages.count(Stage::correlate)) stage_correlate(ctx);
  if (stages.count(Stage::tcm)) stage_tcm(ctx);
  if (stages.count(Stage::enhance)) stage_enhance(ctx);
  if (stages.count(Stage::evaluate)) stage_evaluate(ctx);
}

int run_pipeline(const RunConfig& cfg, const std::set<Stage>& stages) {
  try {
    run_pipeline_checked(cfg, stages);
    return 0;
  } catch (const ConfigError& e) {  // includes DependencyError
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tcm
