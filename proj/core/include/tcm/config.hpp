#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tcm/artifacts.hpp"
#include "tcm/encoder.hpp"
#include "tcm/graph.hpp"
#include "tcm/optim.hpp"
#include "tcm/tcm_model.hpp"

namespace tcm {

enum class DatasetKind { sbm, json_file, edgelist };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::sbm;
  SbmParams sbm;
  std::string path;            // json_file
  std::string edges_path;      // edgelist
  std::string features_path;   // edgelist
  std::string name;            // optional label (selects dataset-specific defaults)
};

struct TaskSetting {
  EncoderConfig arch;
  OptimizerConfig opts;
};

struct TcmSettings {
  double split_frac = 0.7;
  int d_prime = 0;  // 0 = embed_dim / 2, floor 4
  TcmVariant variant = TcmVariant::full;
  bool squared_residual = false;
  OptimizerConfig opts;  // defaults set in parse/resolve
};

struct EvalSettings {
  int n_seeds = 5;
  OptimizerConfig opts;
};

// Fully-resolved run configuration. Every unspecified task inherits its
// published per-task defaults; the master seed is mandatory so no run ever
// draws ambient entropy.
struct RunConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  std::vector<TaskId> tasks;
  int embed_dim = 32;
  SplitFractions splits;
  ArtifactConfig artifacts;
  std::map<TaskId, TaskSetting> task_settings;
  OptimizerConfig correlation_opts;
  TcmSettings tcm;
  OptimizerConfig enhance_opts;
  EvalSettings evaluate;
  std::string out_dir = "out";
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Resolved-config echo; re-parsing the emitted document reproduces the
// identical configuration (and the identical emitted bytes).
std::string config_to_json(const RunConfig& cfg);

// FNV-1a of the resolved config document; stamped into manifests and
// correlation fingerprints.
std::string config_hash(const RunConfig& cfg);

Graph build_dataset(const RunConfig& cfg);

}  // namespace tcm
