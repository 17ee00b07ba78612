#pragma once

#include <string>
#include <vector>

#include "tcm/artifacts.hpp"
#include "tcm/encoder.hpp"
#include "tcm/graph.hpp"
#include "tcm/optim.hpp"

namespace tcm {

struct ProbeResult {
  std::string metric;  // "accuracy" or "roc_auc"
  double value = 0.0;
  double stddev = 0.0;
  int n_seeds = 1;
};

// Trains a linear softmax classifier (with bias) on the train split of a
// frozen representation, selects the epoch with the best validation accuracy,
// and reports test accuracy.
ProbeResult linear_probe_nodeclass(const Representation& rep, const std::vector<int>& labels,
                                   const NodeSplits& splits, const OptimizerConfig& opts, Rng rng);

// Link prediction over the frozen masked-edge/negative pairs: a fresh 50/50
// train/test division of those pairs per seed, a linear scorer on elementwise
// product features, ROC-AUC on the held-out half.
ProbeResult link_predict_auc(const Representation& rep, const Graph& g,
                             const FrozenArtifacts& artifacts, const OptimizerConfig& opts, Rng rng);

// Rank-statistic ROC-AUC with midrank tie handling.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean and sample-stddev aggregate across per-seed probe results.
ProbeResult aggregate_probes(const std::vector<ProbeResult>& results);

Representation baseline_addition(const std::vector<Representation>& reps);
Representation baseline_concat(const std::vector<Representation>& reps);

struct MultiLossResult {
  Representation rep;
  std::vector<double> alphas;      // softmax task weights after training
  std::vector<double> loss_curve;  // combined weighted loss per epoch
};

// Single shared encoder trained on the softmax-weighted sum of the task
// losses, with one private head per task.
MultiLossResult baseline_multiloss(const std::vector<TaskId>& tasks, const Graph& g,
                                   const FrozenArtifacts& artifacts, const EncoderConfig& arch,
                                   const OptimizerConfig& opts, Rng rng);

}  // namespace tcm
