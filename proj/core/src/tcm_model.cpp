#include "tcm/tcm_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tcm/errors.hpp"

namespace tcm {

using nlohmann::json;

TcmVariant tcm_variant_from_string(const std::string& s) {
  if (s == "full") return TcmVariant::full;
  if (s == "no_wr") return TcmVariant::no_wr;
  if (s == "no_wt") return TcmVariant::no_wt;
  if (s == "no_exp") return TcmVariant::no_exp;
  throw ConfigError("unknown tcm variant: " + s + " (expected full, no_wr, no_wt, no_exp)");
}

std::string tcm_variant_name(TcmVariant v) {
  switch (v) {
    case TcmVariant::full: return "full";
    case TcmVariant::no_wr: return "no_wr";
    case TcmVariant::no_wt: return "no_wt";
    case TcmVariant::no_exp: return "no_exp";
  }
  return "full";
}

double tcm_forward(const TcmModel& m, const Matrix& h_i, const Matrix& h_j) {
  if (h_i.cols() != m.d || h_j.cols() != m.d)
    throw DimensionError("tcm_forward: representation width does not match model");
  Matrix q = readout(matmul(h_i, m.w_r), m.readout);
  Matrix k = readout(matmul(h_j, m.w_t), m.readout);
  double s = dot(q.row(0), k.row(0));
  return m.use_exp ? std::exp(s) : s;
}

namespace {

// Projection of one representation through one transform, with what the
// backward pass needs: pooled input for mean/sum, argmax rows for max.
struct ReadProj {
  std::vector<double> q;        // d'
  std::vector<double> pool;     // d (mean/sum readouts)
  std::vector<int> arg_rows;    // d' (max readout)
};

ReadProj project(const Matrix& h, const Matrix& w, ReadoutKind kind) {
  ReadProj p;
  const int dp = w.cols();
  p.q.assign(dp, 0.0);
  if (kind == ReadoutKind::max) {
    Matrix proj = matmul(h, w);
    p.arg_rows.assign(dp, 0);
    for (int b = 0; b < dp; ++b) {
      double best = proj(0, b);
      int row = 0;
      for (int a = 1; a < proj.rows(); ++a)
        if (proj(a, b) > best) {
          best = proj(a, b);
          row = a;
        }
      p.q[b] = best;
      p.arg_rows[b] = row;
    }
  } else {
    p.pool = kind == ReadoutKind::mean ? col_means(h) : col_sums(h);
    for (int b = 0; b < dp; ++b) {
      double s = 0.0;
      for (int a = 0; a < w.rows(); ++a) s += p.pool[a] * w(a, b);
      p.q[b] = s;
    }
  }
  return p;
}

// Accumulates d(loss)/dW given the coefficient on each q component.
void project_backward_w(const Matrix& h, const ReadProj& p, std::span<const double> coef,
                        ReadoutKind kind, Matrix& dw) {
  const int dp = dw.cols();
  if (kind == ReadoutKind::max) {
    for (int b = 0; b < dp; ++b) {
      auto row = h.row(p.arg_rows[b]);
      for (int a = 0; a < dw.rows(); ++a) dw(a, b) += coef[b] * row[a];
    }
  } else {
    for (int a = 0; a < dw.rows(); ++a)
      for (int b = 0; b < dp; ++b) dw(a, b) += coef[b] * p.pool[a];
  }
}

Matrix identity_like(int d, int dp) { return Matrix::eye(d, dp); }

double model_selection_err(const Matrix& pred, const Matrix& truth, const std::vector<int>& ids) {
  if (ids.empty()) return 0.0;
  double s = 0.0;
  for (int id : ids) {
    int k = truth.cols();
    double t = truth(id / k, id % k);
    double p = pred(id / k, id % k);
    s += std::fabs(p - t) / std::max(std::fabs(t), 1e-12);
  }
  return s / ids.size();
}

}  // namespace

std::pair<TcmModel, TcmFitReport> tcm_fit(const std::vector<Representation>& reps,
                                          const CorrelationMatrix& cm, const TcmFitOptions& fit_opts,
                                          Rng rng) {
  const int k = cm.size();
  if (k < 2) throw ParamError("tcm_fit needs at least two tasks");
  if (static_cast<int>(reps.size()) != k)
    throw DimensionError("tcm_fit: representation count does not match matrix size");
  const int d = reps[0].matrix.cols();
  for (const auto& r : reps)
    if (r.matrix.cols() != d) throw DimensionError("tcm_fit: representation widths differ");
  if (fit_opts.split_frac <= 0.0 || fit_opts.split_frac > 1.0)
    throw ParamError("split_frac must be in (0, 1]");

  TcmModel m;
  m.readout = ReadoutKind::mean;
  m.use_exp = fit_opts.variant != TcmVariant::no_exp;
  m.d = d;
  m.d_prime = fit_opts.d_prime > 0 ? fit_opts.d_prime : std::max(4, d / 2);

  const bool train_wr = fit_opts.variant != TcmVariant::no_wr;
  const bool train_wt = fit_opts.variant != TcmVariant::no_wt;

  Rng init_rng = rng.child("init");
  const double scale = 0.1 / std::sqrt(static_cast<double>(d));
  auto init_w = [&](bool trained) {
    if (!trained) return identity_like(d, m.d_prime);
    Matrix w(d, m.d_prime);
    for (auto& x : w.data()) x = init_rng.uniform(-scale, scale);
    return w;
  };
  m.w_r = init_w(train_wr);
  m.w_t = init_w(train_wt);

  // 70/30 split over all k^2 entries, diagonal included.
  TcmFitReport report;
  {
    std::vector<int> ids(static_cast<std::size_t>(k) * k);
    std::iota(ids.begin(), ids.end(), 0);
    Rng split_rng = rng.child("split");
    split_rng.shuffle(ids);
    int n_train = static_cast<int>(std::llround(fit_opts.split_frac * ids.size()));
    n_train = std::clamp(n_train, 1, static_cast<int>(ids.size()));
    if (fit_opts.split_frac < 1.0 && n_train == static_cast<int>(ids.size()))
      throw ParamError("split leaves no validation entries");
    report.train_entry_ids.assign(ids.begin(), ids.begin() + n_train);
    report.val_entry_ids.assign(ids.begin() + n_train, ids.end());
    std::sort(report.train_entry_ids.begin(), report.train_entry_ids.end());
    std::sort(report.val_entry_ids.begin(), report.val_entry_ids.end());
  }

  Optimizer opt(fit_opts.opts);
  std::size_t wr_id = 0, wt_id = 0;
  if (train_wr) wr_id = opt.add_param(m.w_r.size());
  if (train_wt) wt_id = opt.add_param(m.w_t.size());

  const bool select_on_val = !report.val_entry_ids.empty();
  double best_err = std::numeric_limits<double>::infinity();
  Matrix best_wr = m.w_r, best_wt = m.w_t;
  int best_epoch = 0;

  Matrix dwr(d, m.d_prime), dwt(d, m.d_prime);
  for (int epoch = 1; epoch <= fit_opts.opts.epochs; ++epoch) {
    double loss = tcm_fit_loss(m, reps, cm.values, report.train_entry_ids,
                               fit_opts.squared_residual, train_wr ? &dwr : nullptr,
                               train_wt ? &dwt : nullptr);
    check_divergence(loss, epoch, "tcm fit");
    report.loss_curve.push_back(loss);

    Matrix pred = tcm_predict_matrix(m, reps);
    double sel = model_selection_err(pred, cm.values,
                                     select_on_val ? report.val_entry_ids : report.train_entry_ids);
    if (sel < best_err) {
      best_err = sel;
      best_wr = m.w_r;
      best_wt = m.w_t;
      best_epoch = epoch;
    }

    opt.begin_epoch();
    if (train_wr) opt.update(wr_id, m.w_r.data(), dwr.data());
    if (train_wt) opt.update(wt_id, m.w_t.data(), dwt.data());
  }

  m.w_r = best_wr;
  m.w_t = best_wt;
  report.best_epoch = best_epoch;

  Matrix final_pred(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) final_pred(i, j) = tcm_forward(m, reps[i].matrix, reps[j].matrix);
  report.train_rel_err = model_selection_err(final_pred, cm.values, report.train_entry_ids);
  report.val_rel_err = model_selection_err(final_pred, cm.values, report.val_entry_ids);
  return {std::move(m), std::move(report)};
}

Matrix tcm_predict_matrix(const TcmModel& m, const std::vector<Representation>& reps) {
  const int k = static_cast<int>(reps.size());
  Matrix pred(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) pred(i, j) = tcm_forward(m, reps[i].matrix, reps[j].matrix);
  return pred;
}

double tcm_fit_loss(const TcmModel& m, const std::vector<Representation>& reps,
                    const Matrix& truth, const std::vector<int>& entry_ids, bool squared_residual,
                    Matrix* dwr, Matrix* dwt) {
  const int k = static_cast<int>(reps.size());
  std::vector<ReadProj> qs(k), ks(k);
  for (int i = 0; i < k; ++i) {
    qs[i] = project(reps[i].matrix, m.w_r, m.readout);
    ks[i] = project(reps[i].matrix, m.w_t, m.readout);
  }
  if (dwr) *dwr = Matrix(m.w_r.rows(), m.w_r.cols());
  if (dwt) *dwt = Matrix(m.w_t.rows(), m.w_t.cols());

  double loss = 0.0;
  std::vector<double> coef(m.d_prime);
  for (int id : entry_ids) {
    int i = id / k, j = id % k;
    double s = dot(std::span<const double>(qs[i].q), std::span<const double>(ks[j].q));
    double pred = m.use_exp ? std::exp(s) : s;
    double residual = pred - truth(i, j);
    double dpred;
    if (squared_residual) {
      loss += residual * residual;
      dpred = 2.0 * residual;
    } else {
      loss += std::fabs(residual);
      dpred = residual > 0 ? 1.0 : (residual < 0 ? -1.0 : 0.0);
    }
    double ds = dpred * (m.use_exp ? pred : 1.0);
    if (dwr) {
      for (int b = 0; b < m.d_prime; ++b) coef[b] = ds * ks[j].q[b];
      project_backward_w(reps[i].matrix, qs[i], coef, m.readout, *dwr);
    }
    if (dwt) {
      for (int b = 0; b < m.d_prime; ++b) coef[b] = ds * qs[i].q[b];
      project_backward_w(reps[j].matrix, ks[j], coef, m.readout, *dwt);
    }
  }
  return loss;
}

double tcm_holdout_error(const std::vector<Representation>& reps, const CorrelationMatrix& cm,
                         int holdout, const TcmFitOptions& fit_opts, Rng rng) {
  const int k = cm.size();
  if (holdout < 0 || holdout >= k) throw ParamError("holdout index out of range");
  std::vector<int> keep;
  std::vector<Representation> sub_reps;
  for (int i = 0; i < k; ++i)
    if (i != holdout) {
      keep.push_back(i);
      sub_reps.push_back(reps[i]);
    }
  TcmFitOptions sub_opts = fit_opts;
  sub_opts.split_frac = 1.0;  // every visible entry trains; selection on train error
  auto [model, report] = tcm_fit(sub_reps, cm.submatrix(keep), sub_opts, rng);

  double s = 0.0;
  int count = 0;
  for (int j = 0; j < k; ++j) {
    double pred = tcm_forward(model, reps[holdout].matrix, reps[j].matrix);
    s += std::fabs(pred - cm.values(holdout, j)) / std::max(std::fabs(cm.values(holdout, j)), 1e-12);
    ++count;
    if (j != holdout) {
      pred = tcm_forward(model, reps[j].matrix, reps[holdout].matrix);
      s += std::fabs(pred - cm.values(j, holdout)) / std::max(std::fabs(cm.values(j, holdout)), 1e-12);
      ++count;
    }
  }
  return s / count;
}

namespace {

Matrix mix_representations(const std::vector<Representation>& reps, const Matrix& mix_w) {
  const int k = static_cast<int>(reps.size());
  const int n = reps[0].matrix.rows();
  const int d = reps[0].matrix.cols();
  Matrix h_mix(n, d);
  for (int i = 0; i < k; ++i) {
    const Matrix& hi = reps[i].matrix;
    for (int a = 0; a < n; ++a) {
      auto dst = h_mix.row(a);
      auto src = hi.row(a);
      for (int b = 0; b < d; ++b) dst[b] += src[b] * mix_w(i, b);
    }
  }
  return h_mix;
}

}  // namespace

double enhance_objective(const TcmModel& m, const std::vector<Representation>& reps,
                         const std::vector<double>& atd_values, const Matrix& mix_w, Matrix* dmix) {
  const int k = static_cast<int>(reps.size());
  const int n = reps[0].matrix.rows();
  const int d = reps[0].matrix.cols();
  Matrix h_mix = mix_representations(reps, mix_w);
  ReadProj q = project(h_mix, m.w_r, m.readout);

  double obj = 0.0;
  Matrix dh(n, d);
  std::vector<double> coef(m.d_prime);
  for (int i = 0; i < k; ++i) {
    ReadProj key = project(reps[i].matrix, m.w_t, m.readout);
    double s = dot(std::span<const double>(q.q), std::span<const double>(key.q));
    double score = m.use_exp ? std::exp(s) : s;
    double weight = 1.0 / atd_values[i];
    obj += weight * std::fabs(score);
    if (!dmix) continue;
    double ds = weight * (score >= 0 ? 1.0 : -1.0) * (m.use_exp ? score : 1.0);
    for (int b = 0; b < m.d_prime; ++b) coef[b] = ds * key.q[b];
    if (m.readout == ReadoutKind::max) {
      for (int b = 0; b < m.d_prime; ++b) {
        auto row = dh.row(q.arg_rows[b]);
        for (int a = 0; a < d; ++a) row[a] += coef[b] * m.w_r(a, b);
      }
    } else {
      double inv = m.readout == ReadoutKind::mean ? 1.0 / n : 1.0;
      for (int a = 0; a < d; ++a) {
        double g = 0.0;
        for (int b = 0; b < m.d_prime; ++b) g += coef[b] * m.w_r(a, b);
        g *= inv;
        for (int r = 0; r < n; ++r) dh(r, a) += g;
      }
    }
  }
  if (dmix) {
    *dmix = Matrix(k, d);
    for (int i = 0; i < k; ++i) {
      const Matrix& hi = reps[i].matrix;
      for (int a = 0; a < n; ++a) {
        auto ga = dh.row(a);
        auto ha = hi.row(a);
        for (int b = 0; b < d; ++b) (*dmix)(i, b) += ga[b] * ha[b];
      }
    }
  }
  return obj;
}

EnhanceResult enhance(const TcmModel& m, const std::vector<Representation>& reps,
                      const std::vector<double>& atd_values, const OptimizerConfig& opts, Rng rng) {
  const int k = static_cast<int>(reps.size());
  if (k < 1) throw ParamError("enhance needs at least one representation");
  if (static_cast<int>(atd_values.size()) != k)
    throw DimensionError("enhance: one difficulty weight per representation required");
  const int n = reps[0].matrix.rows();
  const int d = reps[0].matrix.cols();
  for (const auto& r : reps)
    if (r.matrix.rows() != n || r.matrix.cols() != d)
      throw DimensionError("enhance: representation shapes differ");

  MixWeights mix;
  mix.w = Matrix(k, d, 1.0 / k);  // start at the plain average of the inputs

  Optimizer opt(opts);
  auto wid = opt.add_param(mix.w.size());

  EnhanceResult out;
  Matrix dmix;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    double obj = enhance_objective(m, reps, atd_values, mix.w, &dmix);
    check_divergence(obj, epoch, "enhancement");
    out.objective_curve.push_back(obj);
    opt.begin_epoch();
    opt.update(wid, mix.w.data(), dmix.data());
  }

  out.rep.matrix = mix_representations(reps, mix.w);
  out.rep.matrix.require_finite("enhanced representation");
  out.rep.task = "tcm-enhanced";
  out.rep.seed = rng.seed();
  out.rep.dataset = reps[0].dataset;
  out.weights = std::move(mix);
  return out;
}

std::string tcm_model_to_json(const TcmModel& m) {
  json j;
  j["w_r"] = m.w_r.data();
  j["w_t"] = m.w_t.data();
  j["readout"] = readout_name(m.readout);
  j["use_exp"] = m.use_exp;
  j["d"] = m.d;
  j["d_prime"] = m.d_prime;
  return j.dump(2) + "\n";
}

TcmModel tcm_model_from_json(const std::string& text) {
  json j = json::parse(text);
  TcmModel m;
  m.d = j.at("d").get<int>();
  m.d_prime = j.at("d_prime").get<int>();
  m.w_r = Matrix(m.d, m.d_prime, j.at("w_r").get<std::vector<double>>());
  m.w_t = Matrix(m.d, m.d_prime, j.at("w_t").get<std::vector<double>>());
  m.readout = readout_from_string(j.at("readout").get<std::string>());
  m.use_exp = j.at("use_exp").get<bool>();
  return m;
}

void save_tcm_model(const TcmModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << tcm_model_to_json(m);
}

TcmModel load_tcm_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tcm model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return tcm_model_from_json(text);
}

std::string tcm_report_to_json(const TcmFitReport& r) {
  json j;
  j["train_entry_ids"] = r.train_entry_ids;
  j["val_entry_ids"] = r.val_entry_ids;
  j["train_rel_err"] = r.train_rel_err;
  j["val_rel_err"] = r.val_rel_err;
  j["best_epoch"] = r.best_epoch;
  j["loss_curve"] = r.loss_curve;
  return j.dump(2) + "\n";
}

}  // namespace tcm
