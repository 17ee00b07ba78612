#include "tcm/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "tcm/errors.hpp"

namespace tcm {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

OptimizerConfig parse_optimizer(const json& j, OptimizerConfig base, const std::string& where) {
  reject_unknown_keys(j, {"kind", "learning_rate", "weight_decay", "epochs", "beta1", "beta2", "epsilon"},
                      where);
  if (j.contains("kind")) base.kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("weight_decay")) base.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("epochs")) base.epochs = j.at("epochs").get<int>();
  if (j.contains("beta1")) base.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) base.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) base.epsilon = j.at("epsilon").get<double>();
  base.validate();
  return base;
}

json optimizer_to_json(const OptimizerConfig& o) {
  json j;
  j["kind"] = optimizer_kind_name(o.kind);
  j["learning_rate"] = o.learning_rate;
  j["weight_decay"] = o.weight_decay;
  j["epochs"] = o.epochs;
  j["beta1"] = o.beta1;
  j["beta2"] = o.beta2;
  j["epsilon"] = o.epsilon;
  return j;
}

DatasetSpec parse_dataset(const json& j) {
  DatasetSpec d;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s != "synthetic-sbm")
      throw ConfigError("dataset shorthand must be \"synthetic-sbm\", got \"" + s + "\"");
    d.kind = DatasetKind::sbm;
    return d;
  }
  if (!j.is_object()) throw ConfigError("dataset must be a string shorthand or an object");
  std::string kind = j.value("kind", "synthetic-sbm");
  if (kind == "synthetic-sbm") {
    reject_unknown_keys(j, {"kind", "blocks", "nodes_per_block", "p_in", "p_out", "feat_dim", "noise", "name"},
                        "dataset");
    d.kind = DatasetKind::sbm;
    d.sbm.blocks = j.value("blocks", d.sbm.blocks);
    d.sbm.nodes_per_block = j.value("nodes_per_block", d.sbm.nodes_per_block);
    d.sbm.p_in = j.value("p_in", d.sbm.p_in);
    d.sbm.p_out = j.value("p_out", d.sbm.p_out);
    d.sbm.feat_dim = j.value("feat_dim", d.sbm.feat_dim);
    d.sbm.noise = j.value("noise", d.sbm.noise);
    d.name = j.value("name", "");
  } else if (kind == "json") {
    reject_unknown_keys(j, {"kind", "path", "name"}, "dataset");
    d.kind = DatasetKind::json_file;
    if (!j.contains("path")) throw ConfigError("dataset of kind json needs a path");
    d.path = j.at("path").get<std::string>();
    d.name = j.value("name", "");
  } else if (kind == "edgelist") {
    reject_unknown_keys(j, {"kind", "edges", "features", "name"}, "dataset");
    d.kind = DatasetKind::edgelist;
    if (!j.contains("edges") || !j.contains("features"))
      throw ConfigError("dataset of kind edgelist needs edges and features paths");
    d.edges_path = j.at("edges").get<std::string>();
    d.features_path = j.at("features").get<std::string>();
    d.name = j.value("name", "");
  } else {
    throw ConfigError("unknown dataset kind \"" + kind + "\"");
  }
  return d;
}

json dataset_to_json(const DatasetSpec& d) {
  json j;
  switch (d.kind) {
    case DatasetKind::sbm:
      j["kind"] = "synthetic-sbm";
      j["blocks"] = d.sbm.blocks;
      j["nodes_per_block"] = d.sbm.nodes_per_block;
      j["p_in"] = d.sbm.p_in;
      j["p_out"] = d.sbm.p_out;
      j["feat_dim"] = d.sbm.feat_dim;
      j["noise"] = d.sbm.noise;
      break;
    case DatasetKind::json_file:
      j["kind"] = "json";
      j["path"] = d.path;
      break;
    case DatasetKind::edgelist:
      j["kind"] = "edgelist";
      j["edges"] = d.edges_path;
      j["features"] = d.features_path;
      break;
  }
  if (!d.name.empty()) j["name"] = d.name;
  return j;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  reject_unknown_keys(j, {"seed", "dataset", "tasks", "embed_dim", "splits", "artifacts",
                          "task_overrides", "correlation", "tcm", "enhance", "evaluate", "out_dir"},
                      "config");

  RunConfig cfg;
  if (!j.contains("seed")) throw ConfigError("config must declare a seed (no implicit entropy)");
  cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));

  if (j.contains("tasks")) {
    for (const auto& t : j.at("tasks")) cfg.tasks.push_back(task_from_string(t.get<std::string>()));
    if (cfg.tasks.empty()) throw ConfigError("tasks list must not be empty");
  } else {
    cfg.tasks = base_tasks();
  }

  cfg.embed_dim = j.value("embed_dim", 32);
  if (cfg.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");

  if (j.contains("splits")) {
    const auto& s = j.at("splits");
    reject_unknown_keys(s, {"train", "val", "test"}, "splits");
    cfg.splits.train = s.value("train", cfg.splits.train);
    cfg.splits.val = s.value("val", cfg.splits.val);
    cfg.splits.test = s.value("test", cfg.splits.test);
  }

  cfg.artifacts.embed_dim = cfg.embed_dim;
  if (j.contains("artifacts")) {
    const auto& a = j.at("artifacts");
    reject_unknown_keys(a, {"feature_mask_ratio", "edge_mask_ratio", "clusters", "subgraph_size",
                            "pca_rank", "attr_pairs_per_node"},
                        "artifacts");
    cfg.artifacts.feature_mask_ratio = a.value("feature_mask_ratio", cfg.artifacts.feature_mask_ratio);
    cfg.artifacts.edge_mask_ratio = a.value("edge_mask_ratio", cfg.artifacts.edge_mask_ratio);
    cfg.artifacts.clusters = a.value("clusters", cfg.artifacts.clusters);
    cfg.artifacts.subgraph_size = a.value("subgraph_size", cfg.artifacts.subgraph_size);
    cfg.artifacts.pca_rank = a.value("pca_rank", cfg.artifacts.pca_rank);
    cfg.artifacts.attr_pairs_per_node = a.value("attr_pairs_per_node", cfg.artifacts.attr_pairs_per_node);
  }
  cfg.artifacts.validate();

  // Per-task defaults, then explicit overrides.
  for (TaskId t : cfg.tasks) {
    TaskSetting s;
    s.arch = default_encoder_config(t, cfg.embed_dim);
    s.opts = default_optimizer_config(t, cfg.dataset.name);
    cfg.task_settings[t] = s;
  }
  if (j.contains("task_overrides")) {
    for (const auto& [name, body] : j.at("task_overrides").items()) {
      TaskId t = task_from_string(name);
      if (!cfg.task_settings.count(t))
        throw ConfigError("task_overrides names task \"" + name + "\" that is not in the task list");
      auto& s = cfg.task_settings[t];
      reject_unknown_keys(body, {"kind", "learning_rate", "weight_decay", "epochs", "beta1", "beta2",
                                 "epsilon", "n_gcn", "n_linear", "prelu", "early_stop", "patience"},
                          "task_overrides." + name);
      json opt_part;
      for (const auto& key : {"kind", "learning_rate", "weight_decay", "epochs", "beta1", "beta2", "epsilon"})
        if (body.contains(key)) opt_part[key] = body.at(key);
      s.opts = parse_optimizer(opt_part, s.opts, "task_overrides." + name);
      if (body.contains("n_gcn")) s.arch.n_gcn = body.at("n_gcn").get<int>();
      if (body.contains("n_linear")) s.arch.n_linear = body.at("n_linear").get<int>();
      if (body.contains("prelu")) s.arch.prelu = body.at("prelu").get<bool>();
      if (body.contains("early_stop")) s.arch.early_stop = body.at("early_stop").get<bool>();
      if (body.contains("patience")) s.arch.patience = body.at("patience").get<int>();
    }
  }

  // Cross-task head fits reuse the downstream-probe budget.
  cfg.correlation_opts.kind = OptimizerKind::adam;
  cfg.correlation_opts.learning_rate = 0.001;
  cfg.correlation_opts.weight_decay = 0.0005;
  cfg.correlation_opts.epochs = 300;
  if (j.contains("correlation"))
    cfg.correlation_opts = parse_optimizer(j.at("correlation"), cfg.correlation_opts, "correlation");

  cfg.tcm.opts.kind = OptimizerKind::adam;
  cfg.tcm.opts.learning_rate = 0.01;
  cfg.tcm.opts.weight_decay = 0.0;
  cfg.tcm.opts.epochs = 2000;
  if (j.contains("tcm")) {
    const auto& t = j.at("tcm");
    reject_unknown_keys(t, {"split_frac", "d_prime", "variant", "squared_residual", "kind",
                            "learning_rate", "weight_decay", "epochs", "beta1", "beta2", "epsilon"},
                        "tcm");
    cfg.tcm.split_frac = t.value("split_frac", cfg.tcm.split_frac);
    cfg.tcm.d_prime = t.value("d_prime", cfg.tcm.d_prime);
    if (t.contains("variant")) cfg.tcm.variant = tcm_variant_from_string(t.at("variant").get<std::string>());
    cfg.tcm.squared_residual = t.value("squared_residual", cfg.tcm.squared_residual);
    json opt_part;
    for (const auto& key : {"kind", "learning_rate", "weight_decay", "epochs", "beta1", "beta2", "epsilon"})
      if (t.contains(key)) opt_part[key] = t.at(key);
    cfg.tcm.opts = parse_optimizer(opt_part, cfg.tcm.opts, "tcm");
  }
  if (cfg.tcm.split_frac <= 0.0 || cfg.tcm.split_frac > 1.0)
    throw ConfigError("tcm.split_frac must be in (0, 1]");

  cfg.enhance_opts.kind = OptimizerKind::adam;
  cfg.enhance_opts.learning_rate = 0.01;
  cfg.enhance_opts.weight_decay = 0.0;
  cfg.enhance_opts.epochs = 500;
  if (j.contains("enhance"))
    cfg.enhance_opts = parse_optimizer(j.at("enhance"), cfg.enhance_opts, "enhance");

  cfg.evaluate.opts.kind = OptimizerKind::adam;
  cfg.evaluate.opts.learning_rate = 0.001;
  cfg.evaluate.opts.weight_decay = 0.0005;
  cfg.evaluate.opts.epochs = 300;
  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    reject_unknown_keys(e, {"seeds", "kind", "learning_rate", "weight_decay", "epochs", "beta1",
                            "beta2", "epsilon"},
                        "evaluate");
    cfg.evaluate.n_seeds = e.value("seeds", cfg.evaluate.n_seeds);
    if (cfg.evaluate.n_seeds < 1) throw ConfigError("evaluate.seeds must be >= 1");
    json opt_part;
    for (const auto& key : {"kind", "learning_rate", "weight_decay", "epochs", "beta1", "beta2", "epsilon"})
      if (e.contains(key)) opt_part[key] = e.at(key);
    cfg.evaluate.opts = parse_optimizer(opt_part, cfg.evaluate.opts, "evaluate");
  }

  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["dataset"] = dataset_to_json(cfg.dataset);
  json tasks = json::array();
  for (TaskId t : cfg.tasks) tasks.push_back(task_name(t));
  j["tasks"] = std::move(tasks);
  j["embed_dim"] = cfg.embed_dim;
  j["splits"] = {{"train", cfg.splits.train}, {"val", cfg.splits.val}, {"test", cfg.splits.test}};
  j["artifacts"] = {{"feature_mask_ratio", cfg.artifacts.feature_mask_ratio},
                    {"edge_mask_ratio", cfg.artifacts.edge_mask_ratio},
                    {"clusters", cfg.artifacts.clusters},
                    {"subgraph_size", cfg.artifacts.subgraph_size},
                    {"pca_rank", cfg.artifacts.pca_rank},
                    {"attr_pairs_per_node", cfg.artifacts.attr_pairs_per_node}};
  json overrides;
  for (const auto& [t, s] : cfg.task_settings) {
    json body = optimizer_to_json(s.opts);
    body["n_gcn"] = s.arch.n_gcn;
    body["n_linear"] = s.arch.n_linear;
    body["prelu"] = s.arch.prelu;
    body["early_stop"] = s.arch.early_stop;
    body["patience"] = s.arch.patience;
    overrides[task_name(t)] = std::move(body);
  }
  j["task_overrides"] = std::move(overrides);
  j["correlation"] = optimizer_to_json(cfg.correlation_opts);
  json tcm_j = optimizer_to_json(cfg.tcm.opts);
  tcm_j["split_frac"] = cfg.tcm.split_frac;
  tcm_j["d_prime"] = cfg.tcm.d_prime;
  tcm_j["variant"] = tcm_variant_name(cfg.tcm.variant);
  tcm_j["squared_residual"] = cfg.tcm.squared_residual;
  j["tcm"] = std::move(tcm_j);
  j["enhance"] = optimizer_to_json(cfg.enhance_opts);
  json eval_j = optimizer_to_json(cfg.evaluate.opts);
  eval_j["seeds"] = cfg.evaluate.n_seeds;
  j["evaluate"] = std::move(eval_j);
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  // The output directory does not affect any computed value, so two runs of
  // the same experiment into different directories share a fingerprint.
  RunConfig keyed = cfg;
  keyed.out_dir.clear();
  std::string doc = config_to_json(keyed);
  std::uint64_t h = Rng::hash_str(doc.c_str());
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

Graph build_dataset(const RunConfig& cfg) {
  switch (cfg.dataset.kind) {
    case DatasetKind::sbm: {
      Graph g = synth_sbm(cfg.dataset.sbm, Rng(cfg.seed).child("dataset"));
      if (!cfg.dataset.name.empty()) g.name = cfg.dataset.name;
      return g;
    }
    case DatasetKind::json_file: {
      Graph g = load_graph_json(cfg.dataset.path);
      if (!cfg.dataset.name.empty()) g.name = cfg.dataset.name;
      return g;
    }
    case DatasetKind::edgelist:
      return load_graph_edgelist(cfg.dataset.edges_path, cfg.dataset.features_path, cfg.dataset.name);
  }
  throw ConfigError("unhandled dataset kind");
}

}  // namespace tcm
