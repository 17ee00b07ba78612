#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcm/artifacts.hpp"
#include "tcm/graph.hpp"
#include "tcm/matrix.hpp"
#include "tcm/optim.hpp"
#include "tcm/tasks.hpp"

namespace tcm {

enum class LayerKind { gcn, linear };
enum class Activation { none, relu, prelu };

struct EncoderLayer {
  LayerKind kind;
  Matrix w;
  std::vector<double> b;
  Activation act = Activation::none;
};

struct EncoderParams {
  std::vector<EncoderLayer> layers;
  int embed_dim = 0;
};

// Architecture plus training recipe for one task (GCN layers come first,
// linear layers after; hidden width equals the embedding width).
struct EncoderConfig {
  int n_gcn = 1;
  int n_linear = 1;
  int embed_dim = 32;
  bool prelu = false;        // hidden activation (PReLU slope fixed at 0.25)
  bool early_stop = false;   // stop on stalled training loss
  int patience = 20;
};

EncoderParams init_encoder(const EncoderConfig& cfg, int in_dim, Rng& rng);

// Layer-by-layer forward; a gcn layer computes a_hat * (input * W) + b.
Matrix encode(const EncoderParams& params, const Matrix& a_hat, const Matrix& x);

struct EncoderCache {
  std::vector<Matrix> inputs;    // input to each layer
  std::vector<Matrix> preacts;   // pre-activation output of each layer
};

Matrix encode_cached(const EncoderParams& params, const Matrix& a_hat, const Matrix& x,
                     EncoderCache& cache);

struct EncoderGrads {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;

  void accumulate(const EncoderGrads& other);
};

// Backward pass through the whole stack given dLoss/dOutput.
EncoderGrads encoder_backward(const EncoderParams& params, const Matrix& a_hat,
                              const EncoderCache& cache, const Matrix& d_out);

struct Representation {
  Matrix matrix;
  std::string task;
  std::uint64_t seed = 0;
  std::string dataset;
};

std::string representation_to_json(const Representation& r);
Representation representation_from_json(const std::string& text);
void save_representation(const Representation& r, const std::string& path);
Representation load_representation(const std::string& path);

struct TrainResult {
  Representation rep;
  std::vector<double> loss_curve;  // training surrogate per epoch
  double final_loss = 0.0;         // reported task loss at the final parameters
  int epochs_run = 0;
};

// Trains the encoder (plus any task head) against the task's frozen target
// and returns the encoder output with the head discarded. The edge-masking
// task trains on the graph minus its masked edges; every representation is
// exported from the full normalized adjacency.
TrainResult train_ssl(TaskId task, const Graph& g, const FrozenArtifacts& artifacts,
                      const EncoderConfig& arch, const OptimizerConfig& opts, Rng rng);

// Per-task architecture and optimizer defaults; the dataset name selects the
// two documented graphcomp overrides.
EncoderConfig default_encoder_config(TaskId task, int embed_dim);
OptimizerConfig default_optimizer_config(TaskId task, const std::string& dataset_name = "");

}  // namespace tcm
