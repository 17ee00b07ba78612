#include "tcm/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcm/errors.hpp"

namespace tcm {

namespace {

int class_count(const std::vector<int>& labels) {
  int c = 0;
  for (int l : labels) {
    if (l < 0) throw ParamError("labels must be nonnegative");
    c = std::max(c, l + 1);
  }
  return c;
}

// Softmax cross-entropy over the given rows; returns mean loss and writes
// dLogits (already divided by the row count).
double softmax_ce(const Matrix& logits, const std::vector<int>& labels,
                  const std::vector<int>& rows, Matrix* dlogits) {
  double loss = 0.0;
  const int c = logits.cols();
  for (int r : rows) {
    auto row = logits.row(r);
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    double logp = row[labels[r]] - mx - std::log(denom);
    loss -= logp;
    if (dlogits) {
      auto drow = dlogits->row(r);
      for (int j = 0; j < c; ++j) {
        double p = std::exp(row[j] - mx) / denom;
        drow[j] += (p - (j == labels[r] ? 1.0 : 0.0)) / rows.size();
      }
    }
  }
  return loss / rows.size();
}

double accuracy_on(const Matrix& logits, const std::vector<int>& labels,
                   const std::vector<int>& rows) {
  if (rows.empty()) return 0.0;
  int hit = 0;
  for (int r : rows) {
    auto row = logits.row(r);
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (row[j] > row[best]) best = j;
    if (best == labels[r]) ++hit;
  }
  return static_cast<double>(hit) / rows.size();
}

}  // namespace

ProbeResult linear_probe_nodeclass(const Representation& rep, const std::vector<int>& labels,
                                   const NodeSplits& splits, const OptimizerConfig& opts, Rng rng) {
  if (splits.train.empty() || splits.val.empty() || splits.test.empty())
    throw ParamError("node classification probe needs non-empty train/val/test splits");
  const Matrix& h = rep.matrix;
  if (static_cast<int>(labels.size()) != h.rows())
    throw DimensionError("label count does not match representation rows");
  const int d = h.cols();
  const int c = class_count(labels);

  Matrix w(d, c);
  const double limit = std::sqrt(6.0 / (d + c));
  for (auto& x : w.data()) x = rng.uniform(-limit, limit);
  std::vector<double> b(c, 0.0);

  Optimizer opt(opts);
  auto wi = opt.add_param(w.size());
  auto bi = opt.add_param(b.size());

  auto forward = [&]() {
    Matrix logits = matmul(h, w);
    for (int i = 0; i < logits.rows(); ++i) {
      auto row = logits.row(i);
      for (int j = 0; j < c; ++j) row[j] += b[j];
    }
    return logits;
  };

  double best_val = -1.0;
  Matrix best_w = w;
  std::vector<double> best_b = b;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    Matrix logits = forward();
    Matrix dlogits(h.rows(), c);
    double loss = softmax_ce(logits, labels, splits.train, &dlogits);
    check_divergence(loss, epoch, "node classification probe");

    double val_acc = accuracy_on(logits, labels, splits.val);
    if (val_acc > best_val) {
      best_val = val_acc;
      best_w = w;
      best_b = b;
    }

    Matrix dw = matmul_tn(h, dlogits);
    std::vector<double> db = col_sums(dlogits);
    opt.begin_epoch();
    opt.update(wi, w.data(), dw.data());
    opt.update(bi, b, db);
  }

  w = best_w;
  b = best_b;
  ProbeResult out;
  out.metric = "accuracy";
  out.value = accuracy_on(forward(), labels, splits.test);
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw DimensionError("roc_auc: scores and labels must be equal-length and non-empty");
  std::size_t n = scores.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });

  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;  // midrank, 1-based
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }

  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    if (labels[t]) {
      pos += 1.0;
      rank_sum += rank[t];
    }
  double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw ParamError("roc_auc needs both classes present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ProbeResult link_predict_auc(const Representation& rep, const Graph& g,
                             const FrozenArtifacts& artifacts, const OptimizerConfig& opts, Rng rng) {
  (void)g;
  std::vector<Edge> pos = artifacts.masked_edges;
  std::size_t want = std::min(pos.size(), artifacts.negative_edges.size());
  std::vector<Edge> neg(artifacts.negative_edges.begin(), artifacts.negative_edges.begin() + want);
  if (pos.size() < 2 || neg.size() < 2)
    throw ParamError("link prediction needs at least two pairs of each class");

  Rng split_rng = rng.child("pair_split");
  split_rng.shuffle(pos);
  split_rng.shuffle(neg);
  std::size_t pos_half = pos.size() / 2, neg_half = neg.size() / 2;

  const Matrix& h = rep.matrix;
  const int d = h.cols();
  auto pair_feature = [&](const Edge& e, std::vector<double>& out) {
    auto hu = h.row(e.first);
    auto hv = h.row(e.second);
    for (int c = 0; c < d; ++c) out[c] = hu[c] * hv[c];
  };

  std::vector<Edge> train_pairs(pos.begin(), pos.begin() + pos_half);
  std::vector<int> train_labels(pos_half, 1);
  train_pairs.insert(train_pairs.end(), neg.begin(), neg.begin() + neg_half);
  train_labels.insert(train_labels.end(), neg_half, 0);

  std::vector<double> w(d, 0.0);
  double bias = 0.0;
  Rng init_rng = rng.child("head");
  const double scale = 0.1 / std::sqrt(static_cast<double>(d));
  for (auto& x : w) x = init_rng.uniform(-scale, scale);

  Optimizer opt(opts);
  auto wi = opt.add_param(w.size());
  auto bi = opt.add_param(1);

  std::vector<double> feat(d);
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::vector<double> dw(d, 0.0);
    double db = 0.0, loss = 0.0;
    for (std::size_t p = 0; p < train_pairs.size(); ++p) {
      pair_feature(train_pairs[p], feat);
      double a = bias + dot(std::span<const double>(feat), std::span<const double>(w));
      double prob = 1.0 / (1.0 + std::exp(-a));
      double pc = std::clamp(prob, 1e-7, 1.0 - 1e-7);
      loss -= train_labels[p] ? std::log(pc) : std::log(1.0 - pc);
      double gc = (prob - train_labels[p]) / train_pairs.size();
      for (int c = 0; c < d; ++c) dw[c] += gc * feat[c];
      db += gc;
    }
    check_divergence(loss / train_pairs.size(), epoch, "link prediction probe");
    opt.begin_epoch();
    opt.update(wi, w, dw);
    opt.update(bi, std::span<double>(&bias, 1), std::span<const double>(&db, 1));
  }

  std::vector<double> scores;
  std::vector<int> labels;
  auto score_held_out = [&](const std::vector<Edge>& pairs, std::size_t from, int label) {
    for (std::size_t p = from; p < pairs.size(); ++p) {
      pair_feature(pairs[p], feat);
      scores.push_back(bias + dot(std::span<const double>(feat), std::span<const double>(w)));
      labels.push_back(label);
    }
  };
  score_held_out(pos, pos_half, 1);
  score_held_out(neg, neg_half, 0);
  if (scores.size() < 2) throw ParamError("link prediction held-out set is too small");

  ProbeResult out;
  out.metric = "roc_auc";
  out.value = roc_auc(scores, labels);
  return out;
}

ProbeResult aggregate_probes(const std::vector<ProbeResult>& results) {
  if (results.empty()) throw ParamError("aggregate_probes needs at least one result");
  ProbeResult out;
  out.metric = results[0].metric;
  out.n_seeds = static_cast<int>(results.size());
  double mean = 0.0;
  for (const auto& r : results) mean += r.value;
  mean /= results.size();
  double var = 0.0;
  for (const auto& r : results) var += (r.value - mean) * (r.value - mean);
  out.value = mean;
  out.stddev = results.size() > 1 ? std::sqrt(var / (results.size() - 1)) : 0.0;
  return out;
}

Representation baseline_addition(const std::vector<Representation>& reps) {
  if (reps.empty()) throw ParamError("addition baseline needs at least one representation");
  Representation out = reps[0];
  for (std::size_t i = 1; i < reps.size(); ++i) {
    if (!out.matrix.same_shape(reps[i].matrix))
      throw DimensionError("addition baseline: representation shapes differ");
    out.matrix.add_scaled(reps[i].matrix, 1.0);
  }
  out.task = "addition";
  return out;
}

Representation baseline_concat(const std::vector<Representation>& reps) {
  if (reps.empty()) throw ParamError("concat baseline needs at least one representation");
  int n = reps[0].matrix.rows();
  int total = 0;
  for (const auto& r : reps) {
    if (r.matrix.rows() != n) throw DimensionError("concat baseline: row counts differ");
    total += r.matrix.cols();
  }
  Representation out;
  out.matrix = Matrix(n, total);
  int at = 0;
  for (const auto& r : reps) {
    for (int i = 0; i < n; ++i) {
      auto src = r.matrix.row(i);
      auto dst = out.matrix.row(i);
      for (int c = 0; c < r.matrix.cols(); ++c) dst[at + c] = src[c];
    }
    at += r.matrix.cols();
  }
  out.task = "concat";
  out.seed = reps[0].seed;
  out.dataset = reps[0].dataset;
  return out;
}

MultiLossResult baseline_multiloss(const std::vector<TaskId>& tasks, const Graph& g,
                                   const FrozenArtifacts& artifacts, const EncoderConfig& arch,
                                   const OptimizerConfig& opts, Rng rng) {
  if (tasks.empty()) throw ParamError("multi-loss baseline needs at least one task");
  const int k = static_cast<int>(tasks.size());
  const int d = arch.embed_dim;

  std::vector<LossEvaluator> evs;
  for (TaskId t : tasks) evs.push_back(build_target(t, g, artifacts));

  Matrix a_hat = normalize_adjacency(g);
  EncoderParams enc = init_encoder(arch, g.feat_dim(), rng);

  // Private heads, initialized in task order so a single-task run consumes
  // the same rng draws as train_ssl.
  std::vector<Matrix> heads(k), discs(k);
  for (int t = 0; t < k; ++t) {
    const auto& ev = evs[t];
    if (ev.form() == LossForm::squared_norm || ev.form() == LossForm::bce_pairs) {
      double limit = std::sqrt(6.0 / (d + ev.head_cols(d)));
      heads[t] = Matrix(d, ev.head_cols(d));
      for (auto& x : heads[t].data()) x = rng.uniform(-limit, limit);
    } else if (ev.form() == LossForm::contrastive_dgi) {
      double scale = 0.1 / std::sqrt(static_cast<double>(d));
      discs[t] = Matrix(d, d);
      for (auto& x : discs[t].data()) x = rng.uniform(-scale, scale);
    }
  }
  std::vector<double> logits(k, 0.0);

  Matrix x_corrupt;
  bool any_dgi = false;
  for (const auto& ev : evs)
    if (ev.form() == LossForm::contrastive_dgi) any_dgi = true;
  if (any_dgi) x_corrupt = corrupt_features(g.features, artifacts.corruption_perm);

  Optimizer opt(opts);
  std::vector<std::size_t> enc_ids;
  for (auto& layer : enc.layers) {
    enc_ids.push_back(opt.add_param(layer.w.size()));
    enc_ids.push_back(opt.add_param(layer.b.size()));
  }
  std::vector<std::size_t> head_ids(k, 0), disc_ids(k, 0);
  for (int t = 0; t < k; ++t) {
    if (heads[t].size()) head_ids[t] = opt.add_param(heads[t].size());
    if (discs[t].size()) disc_ids[t] = opt.add_param(discs[t].size());
  }
  auto logit_id = opt.add_param(k);

  MultiLossResult out;
  EncoderCache cache, cache_neg;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::vector<double> alpha(k);
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (int t = 0; t < k; ++t) denom += std::exp(logits[t] - mx);
    for (int t = 0; t < k; ++t) alpha[t] = std::exp(logits[t] - mx) / denom;

    Matrix h = encode_cached(enc, a_hat, g.features, cache);
    Matrix h_neg;
    bool neg_done = false;

    Matrix dh(h.rows(), h.cols()), dh_neg;
    std::vector<double> task_loss(k);
    std::vector<Matrix> dheads(k), ddiscs(k);
    double total = 0.0;

    for (int t = 0; t < k; ++t) {
      const auto& ev = evs[t];
      if (ev.form() == LossForm::contrastive_dgi) {
        if (!neg_done) {
          h_neg = encode_cached(enc, a_hat, x_corrupt, cache_neg);
          dh_neg = Matrix(h.rows(), h.cols());
          neg_done = true;
        }
        Matrix dz, dz_neg, dm;
        task_loss[t] = dgi_two_view_objective(h, h_neg, discs[t], &dz, &dz_neg, &dm);
        dh.add_scaled(dz, alpha[t]);
        dh_neg.add_scaled(dz_neg, alpha[t]);
        dm.scale(alpha[t]);
        ddiscs[t] = std::move(dm);
      } else if (ev.form() == LossForm::squared_norm || ev.form() == LossForm::bce_pairs) {
        Matrix phi = ev.features(h);
        Matrix z = matmul(phi, heads[t]);
        Matrix dz;
        task_loss[t] = ev.objective(z, nullptr, &dz, nullptr);
        Matrix dhead = matmul_tn(phi, dz);
        dhead.scale(alpha[t]);
        dheads[t] = std::move(dhead);
        Matrix dphi = matmul_nt(dz, heads[t]);
        dphi.scale(alpha[t]);
        ev.features_backward(h, dphi, dh);
      } else {
        Matrix dz;
        task_loss[t] = ev.objective(h, nullptr, &dz, nullptr);
        dh.add_scaled(dz, alpha[t]);
      }
      total += alpha[t] * task_loss[t];
    }
    check_divergence(total, epoch, "multi-loss baseline");
    out.loss_curve.push_back(total);

    EncoderGrads grads = encoder_backward(enc, a_hat, cache, dh);
    if (neg_done) grads.accumulate(encoder_backward(enc, a_hat, cache_neg, dh_neg));

    std::vector<double> dlogits(k);
    for (int t = 0; t < k; ++t) dlogits[t] = alpha[t] * (task_loss[t] - total);

    opt.begin_epoch();
    std::size_t e = 0;
    for (auto& layer : enc.layers) {
      opt.update(enc_ids[e], layer.w.data(), grads.dw[e / 2].data());
      ++e;
      opt.update(enc_ids[e], layer.b, grads.db[e / 2]);
      ++e;
    }
    for (int t = 0; t < k; ++t) {
      if (heads[t].size()) opt.update(head_ids[t], heads[t].data(), dheads[t].data());
      if (discs[t].size()) opt.update(disc_ids[t], discs[t].data(), ddiscs[t].data());
    }
    opt.update(logit_id, logits, dlogits);
  }

  {
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (int t = 0; t < k; ++t) denom += std::exp(logits[t] - mx);
    out.alphas.resize(k);
    for (int t = 0; t < k; ++t) out.alphas[t] = std::exp(logits[t] - mx) / denom;
  }

  out.rep.matrix = encode(enc, a_hat, g.features);
  out.rep.matrix.require_finite("multi-loss representation");
  out.rep.task = "multi-loss";
  out.rep.seed = rng.seed();
  out.rep.dataset = g.name;
  return out;
}

}  // namespace tcm
