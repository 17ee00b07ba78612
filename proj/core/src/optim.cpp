#include "tcm/optim.hpp"

#include <cmath>
#include <string>

#include "tcm/errors.hpp"

namespace tcm {

void OptimizerConfig::validate() const {
  if (learning_rate <= 0.0) throw ParamError("learning_rate must be > 0");
  if (epochs < 1) throw ParamError("epochs must be >= 1");
  if (weight_decay < 0.0) throw ParamError("weight_decay must be >= 0");
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ParamError("unknown optimizer kind: " + s);
}

std::string optimizer_kind_name(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::size_t Optimizer::add_param(std::size_t n) {
  m_.emplace_back(n, 0.0);
  v_.emplace_back(n, 0.0);
  return m_.size() - 1;
}

void Optimizer::begin_epoch() { ++t_; }

void Optimizer::update(std::size_t idx, std::span<double> param, std::span<const double> grad) {
  auto& m = m_[idx];
  auto& v = v_[idx];
  const double lr = cfg_.learning_rate;
  const double wd = cfg_.weight_decay;
  if (cfg_.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * (grad[i] + wd * param[i]);
    return;
  }
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, t_);
  const double bc2 = 1.0 - std::pow(b2, t_);
  for (std::size_t i = 0; i < param.size(); ++i) {
    double g = grad[i] + wd * param[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

double SquaredNormObjective::objective(const Matrix& z, const Matrix*, Matrix* dz, Matrix*) const {
  if (!z.same_shape(y_)) throw DimensionError("squared-norm objective: prediction shape mismatch");
  double s = 0.0;
  if (dz) *dz = Matrix(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i)
    for (int j = 0; j < z.cols(); ++j) {
      double r = z(i, j) - y_(i, j);
      s += r * r;
      if (dz) (*dz)(i, j) = 2.0 * r;
    }
  return s;
}

double SquaredNormObjective::report(const Matrix& z, const Matrix*) const {
  return frobenius_distance(z, y_);
}

void check_divergence(double loss, int epoch, const char* what) {
  if (!std::isfinite(loss) || loss > 1e12)
    throw DivergenceError(std::string(what) + " diverged at epoch " + std::to_string(epoch));
}

HeadFit linear_head_fit(const Matrix& h, const HeadObjective& target_loss, int head_cols,
                        const OptimizerConfig& opts, Rng rng) {
  if (h.rows() < 1 || h.cols() < 1) throw DimensionError("linear_head_fit: empty input");
  if (head_cols < 1) throw DimensionError("linear_head_fit: head_cols must be >= 1");
  opts.validate();

  const int d = h.cols();
  Matrix w(d, head_cols);
  // Small fan-scaled init keeps seed-to-seed spread of converged losses tight.
  const double w_scale = 0.1 / std::sqrt(static_cast<double>(d));
  for (auto& x : w.data()) x = rng.uniform(-w_scale, w_scale);

  const int ar = target_loss.aux_rows(head_cols);
  const int ac = target_loss.aux_cols(head_cols);
  Matrix aux;
  if (ar > 0 && ac > 0) {
    aux = Matrix(ar, ac);
    const double a_scale = 0.1 / std::sqrt(static_cast<double>(ar));
    for (auto& x : aux.data()) x = rng.uniform(-a_scale, a_scale);
  }

  Optimizer opt(opts);
  auto wi = opt.add_param(w.size());
  std::size_t ai = 0;
  if (aux.size() > 0) ai = opt.add_param(aux.size());

  HeadFit fit;
  fit.curve.reserve(opts.epochs);
  Matrix dz, daux;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    Matrix z = matmul(h, w);
    double obj = target_loss.objective(z, aux.size() ? &aux : nullptr, &dz,
                                       aux.size() ? &daux : nullptr);
    check_divergence(obj, epoch, "linear head fit");
    fit.curve.push_back(obj);
    Matrix dw = matmul_tn(h, dz);
    opt.begin_epoch();
    opt.update(wi, w.data(), dw.data());
    if (aux.size() > 0) opt.update(ai, aux.data(), daux.data());
  }

  Matrix z = matmul(h, w);
  fit.final_loss = target_loss.report(z, aux.size() ? &aux : nullptr);
  check_divergence(fit.final_loss, opts.epochs, "linear head fit");
  fit.w = std::move(w);
  fit.aux = std::move(aux);
  return fit;
}

}  // namespace tcm
