#pragma once

#include <string>
#include <vector>

#include "tcm/correlation.hpp"
#include "tcm/encoder.hpp"
#include "tcm/linalg.hpp"
#include "tcm/matrix.hpp"
#include "tcm/optim.hpp"

namespace tcm {

enum class TcmVariant { full, no_wr, no_wt, no_exp };

TcmVariant tcm_variant_from_string(const std::string& s);
std::string tcm_variant_name(TcmVariant v);

// Correlation model: score(H_i, H_j) = exp(q k^T) with
// q = Readout(H_i W_r) and k = Readout(H_j W_t). Asymmetric by construction
// and strictly positive whenever the exponential is enabled.
struct TcmModel {
  Matrix w_r;  // d x d'
  Matrix w_t;  // d x d'
  ReadoutKind readout = ReadoutKind::mean;
  bool use_exp = true;
  int d = 0;
  int d_prime = 0;
};

double tcm_forward(const TcmModel& m, const Matrix& h_i, const Matrix& h_j);

struct TcmFitReport {
  std::vector<int> train_entry_ids;  // flattened i*k + j
  std::vector<int> val_entry_ids;
  double train_rel_err = 0.0;  // mean |pred - true| / true at the selected model
  double val_rel_err = 0.0;
  std::vector<double> loss_curve;
  int best_epoch = 0;
};

struct TcmFitOptions {
  double split_frac = 0.7;  // fraction of the k^2 entries used for training
  OptimizerConfig opts;     // gradient-descent budget for W_r / W_t
  TcmVariant variant = TcmVariant::full;
  bool squared_residual = false;  // default is absolute error per entry
  int d_prime = 0;                // 0 = d/2, floor 4
};

// Fits the model to a correlation matrix; the ablation variants freeze the
// removed transform at identity (no_wr / no_wt) or drop the exponential
// (no_exp). The returned model is the epoch with the lowest validation error
// (lowest training error when the split leaves no validation entries, i.e.
// split_frac = 1).
std::pair<TcmModel, TcmFitReport> tcm_fit(const std::vector<Representation>& reps,
                                          const CorrelationMatrix& cm, const TcmFitOptions& fit_opts,
                                          Rng rng);

// Pairwise scores over all ordered pairs, diagonal included.
Matrix tcm_predict_matrix(const TcmModel& m, const std::vector<Representation>& reps);

// Fitting loss (sum over the given flattened entries of |pred - truth|, or
// the squared residual) with optional gradients w.r.t. the two transforms.
double tcm_fit_loss(const TcmModel& m, const std::vector<Representation>& reps,
                    const Matrix& truth, const std::vector<int>& entry_ids, bool squared_residual,
                    Matrix* dwr, Matrix* dwt);

// Enhancement objective: sum_i |score(H_mix, H_i)| / atd_i with optional
// gradient w.r.t. the mixing weights.
double enhance_objective(const TcmModel& m, const std::vector<Representation>& reps,
                         const std::vector<double>& atd_values, const Matrix& mix_w, Matrix* dmix);

// Leave-one-task-out: fit on the submatrix without `holdout`, then report the
// mean relative error over the held-out row and column.
double tcm_holdout_error(const std::vector<Representation>& reps, const CorrelationMatrix& cm,
                         int holdout, const TcmFitOptions& fit_opts, Rng rng);

// Per-task, per-dimension mixing coefficients of the enhancement mixer:
// H'(a, b) = sum_i H_i(a, b) * w(i, b).
struct MixWeights {
  Matrix w;  // k x d
};

struct EnhanceResult {
  Representation rep;  // task id "tcm-enhanced"
  MixWeights weights;
  std::vector<double> objective_curve;
};

// Trains only the linear mixer against the frozen model, minimizing the
// difficulty-weighted sum of predicted correlation scores against every base
// representation. Weights start at 1/k (the average of the inputs).
EnhanceResult enhance(const TcmModel& m, const std::vector<Representation>& reps,
                      const std::vector<double>& atd_values, const OptimizerConfig& opts, Rng rng);

std::string tcm_model_to_json(const TcmModel& m);
TcmModel tcm_model_from_json(const std::string& text);
void save_tcm_model(const TcmModel& m, const std::string& path);
TcmModel load_tcm_model(const std::string& path);
std::string tcm_report_to_json(const TcmFitReport& r);

}  // namespace tcm
