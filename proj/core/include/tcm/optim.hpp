#pragma once

#include <span>
#include <string>
#include <vector>

#include "tcm/matrix.hpp"
#include "tcm/rng.hpp"

namespace tcm {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.001;
  double weight_decay = 0.0;
  int epochs = 300;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string optimizer_kind_name(OptimizerKind k);

// First-order optimizer over a set of flat parameter buffers. Weight decay is
// folded into the gradient (L2 style), matching the usual Adam formulation.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg);

  std::size_t add_param(std::size_t n);
  void begin_epoch();  // advances the Adam bias-correction step
  void update(std::size_t idx, std::span<double> param, std::span<const double> grad);

  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Loss-over-E-predictions contract consumed by linear_head_fit. `objective`
// is the smooth surrogate actually optimized (with gradients); `report` is
// the value exposed to callers (Frobenius norm for regression losses).
class HeadObjective {
 public:
  virtual ~HeadObjective() = default;

  // Aux head parameters (e.g. a bilinear discriminator); zero-size when unused.
  virtual int aux_rows(int z_cols) const { (void)z_cols; return 0; }
  virtual int aux_cols(int z_cols) const { (void)z_cols; return 0; }

  virtual double objective(const Matrix& z, const Matrix* aux, Matrix* dz, Matrix* daux) const = 0;
  virtual double report(const Matrix& z, const Matrix* aux) const = 0;
};

// min_W ||Z - Y||_F^2 surrogate, reported as ||Z - Y||_F.
class SquaredNormObjective final : public HeadObjective {
 public:
  explicit SquaredNormObjective(Matrix target) : y_(std::move(target)) {}
  double objective(const Matrix& z, const Matrix* aux, Matrix* dz, Matrix* daux) const override;
  double report(const Matrix& z, const Matrix* aux) const override;

 private:
  Matrix y_;
};

struct HeadFit {
  Matrix w;
  Matrix aux;            // empty when the objective declares no aux head
  double final_loss;     // report() at the final head
  std::vector<double> curve;
};

// Fits Z = H * W (plus optional aux parameters) by gradient descent for the
// full epoch budget; the returned loss is the value correlation ratios consume.
// Throws DivergenceError naming the epoch if the objective goes non-finite or
// exceeds 1e12.
HeadFit linear_head_fit(const Matrix& h, const HeadObjective& target_loss, int head_cols,
                        const OptimizerConfig& opts, Rng rng);

// Divergence guard shared by all training loops.
void check_divergence(double loss, int epoch, const char* what);

}  // namespace tcm
