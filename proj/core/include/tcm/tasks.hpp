#pragma once

#include <string>
#include <vector>

#include "tcm/artifacts.hpp"
#include "tcm/graph.hpp"
#include "tcm/matrix.hpp"
#include "tcm/optim.hpp"

namespace tcm {

enum class TaskId {
  graphcomp,
  attributemask,
  gae,
  edgemask,
  nodeprop,
  discluster,
  dgi,
  subgcon,
  pairattsim,
};

enum class TaskCategory { FB, SB, APB, CB };

enum class LossForm { squared_norm, bce_adjacency, bce_pairs, contrastive_dgi, contrastive_subg };

struct TaskSpec {
  TaskId id;
  TaskCategory category;
  LossForm form;
};

const TaskSpec& task_spec(TaskId id);
TaskId task_from_string(const std::string& s);
std::string task_name(TaskId id);
std::string category_name(TaskCategory c);
// The eight tasks trained by default; pairattsim is the generalization
// hold-out and only runs when requested explicitly.
const std::vector<TaskId>& base_tasks();
const std::vector<TaskId>& all_tasks();

// Row i of the output is row perm[i] of x.
Matrix corrupt_features(const Matrix& x, const std::vector<int>& perm);

// A frozen, deterministic scoring protocol for one task: how a prediction
// Z = features(H) * W is turned into a scalar loss. Regression targets are
// z-scored per column so losses are magnitude-comparable across tasks.
class LossEvaluator {
 public:
  TaskId id() const { return spec_.id; }
  LossForm form() const { return spec_.form; }
  bool is_regression() const { return spec_.form == LossForm::squared_norm; }
  const Matrix& target() const { return target_; }

  // Width of the tuning head fit on an H with h_cols columns.
  int head_cols(int h_cols) const;
  // Aux head parameters (the bilinear discriminator for the infomax task).
  int aux_rows(int z_cols) const;
  int aux_cols(int z_cols) const;

  // Fixed featurization of H: identity, masked-row restriction, or
  // elementwise-product pair rows.
  Matrix features(const Matrix& h) const;
  // Chain rule through features(): accumulates into dh (same shape as h).
  void features_backward(const Matrix& h, const Matrix& dphi, Matrix& dh) const;

  // Smooth training surrogate with gradients (squared residual for
  // regression forms, mean BCE / hinge otherwise).
  double objective(const Matrix& z, const Matrix* aux, Matrix* dz, Matrix* daux) const;
  // Reported loss: Frobenius norm of the residual for regression forms,
  // otherwise identical to the surrogate.
  double loss(const Matrix& z, const Matrix* aux) const;

  friend LossEvaluator build_target(const TaskSpec& spec, const Graph& g,
                                    const FrozenArtifacts& artifacts);

 private:
  TaskSpec spec_;
  Matrix target_;
  std::vector<Edge> pos_pairs_, neg_pairs_;  // adjacency / masked-edge scoring
  std::vector<Edge> sim_pairs_;              // attribute-similarity pairs
  std::vector<int> masked_rows_;
  std::vector<int> perm_;                    // corruption permutation
  std::vector<std::vector<int>> subgraphs_;
  static constexpr double kMargin = 0.5;
};

LossEvaluator build_target(const TaskSpec& spec, const Graph& g, const FrozenArtifacts& artifacts);
inline LossEvaluator build_target(TaskId id, const Graph& g, const FrozenArtifacts& artifacts) {
  return build_target(task_spec(id), g, artifacts);
}

// Scalar loss of head W (plus optional aux head) applied to representation H.
double eval_loss(const LossEvaluator& ev, const Matrix& h, const Matrix& w,
                 const Matrix* aux_head = nullptr);

// HeadObjective adapter so linear_head_fit can optimize any task evaluator.
class EvaluatorObjective final : public HeadObjective {
 public:
  explicit EvaluatorObjective(const LossEvaluator& ev) : ev_(ev) {}
  int aux_rows(int z_cols) const override { return ev_.aux_rows(z_cols); }
  int aux_cols(int z_cols) const override { return ev_.aux_cols(z_cols); }
  double objective(const Matrix& z, const Matrix* aux, Matrix* dz, Matrix* daux) const override {
    return ev_.objective(z, aux, dz, daux);
  }
  double report(const Matrix& z, const Matrix* aux) const override { return ev_.loss(z, aux); }

 private:
  const LossEvaluator& ev_;
};

// Fits a linear tuning head for H on the evaluator's task and returns the fit.
HeadFit fit_head(const LossEvaluator& ev, const Matrix& h, const OptimizerConfig& opts, Rng rng);

// Training-time infomax loss over a clean and a corrupted encoder view; the
// evaluator protocol above only sees a single frozen representation.
double dgi_two_view_objective(const Matrix& z, const Matrix& z_neg, const Matrix& m,
                              Matrix* dz, Matrix* dz_neg, Matrix* dm);

// Mean binary cross-entropy of raw probabilities against 0/1 labels, with the
// same clamping used everywhere ([1e-7, 1 - 1e-7]).
double bce_mean(const std::vector<double>& probs, const std::vector<int>& labels);

}  // namespace tcm
