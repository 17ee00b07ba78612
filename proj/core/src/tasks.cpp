#include "tcm/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "tcm/errors.hpp"
#include "tcm/linalg.hpp"

namespace tcm {

namespace {

const std::vector<TaskSpec> kSpecs = {
    {TaskId::graphcomp, TaskCategory::FB, LossForm::squared_norm},
    {TaskId::attributemask, TaskCategory::FB, LossForm::squared_norm},
    {TaskId::gae, TaskCategory::SB, LossForm::bce_adjacency},
    {TaskId::edgemask, TaskCategory::SB, LossForm::bce_pairs},
    {TaskId::nodeprop, TaskCategory::APB, LossForm::squared_norm},
    {TaskId::discluster, TaskCategory::APB, LossForm::squared_norm},
    {TaskId::dgi, TaskCategory::CB, LossForm::contrastive_dgi},
    {TaskId::subgcon, TaskCategory::CB, LossForm::contrastive_subg},
    {TaskId::pairattsim, TaskCategory::FB, LossForm::squared_norm},
};

const std::vector<std::string> kNames = {
    "graphcomp", "attributemask", "gae", "edgemask", "nodeprop",
    "discluster", "dgi", "subgcon", "pairattsim",
};

constexpr double kProbClamp = 1e-7;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double bce_one(double p, int label) {
  p = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
  return label ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace

const TaskSpec& task_spec(TaskId id) { return kSpecs[static_cast<int>(id)]; }

std::string task_name(TaskId id) { return kNames[static_cast<int>(id)]; }

TaskId task_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == s) return static_cast<TaskId>(i);
  std::string valid;
  for (const auto& n : kNames) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown task id \"" + s + "\"; valid ids: " + valid);
}

std::string category_name(TaskCategory c) {
  switch (c) {
    case TaskCategory::FB: return "FB";
    case TaskCategory::SB: return "SB";
    case TaskCategory::APB: return "APB";
    case TaskCategory::CB: return "CB";
  }
  return "";
}

const std::vector<TaskId>& base_tasks() {
  static const std::vector<TaskId> v{
      TaskId::graphcomp, TaskId::attributemask, TaskId::gae,      TaskId::edgemask,
      TaskId::nodeprop,  TaskId::discluster,    TaskId::dgi,      TaskId::subgcon,
  };
  return v;
}

const std::vector<TaskId>& all_tasks() {
  static const std::vector<TaskId> v = [] {
    std::vector<TaskId> t = base_tasks();
    t.push_back(TaskId::pairattsim);
    return t;
  }();
  return v;
}

Matrix corrupt_features(const Matrix& x, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != x.rows())
    throw DimensionError("corrupt_features: permutation length mismatch");
  Matrix out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    auto src = x.row(perm[i]);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

double bce_mean(const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw DimensionError("bce_mean: probs and labels must be equal-length and non-empty");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += bce_one(probs[i], labels[i]);
  return s / probs.size();
}

int LossEvaluator::head_cols(int h_cols) const {
  switch (spec_.form) {
    case LossForm::squared_norm: return target_.cols();
    case LossForm::bce_pairs: return 1;
    case LossForm::bce_adjacency:
    case LossForm::contrastive_dgi:
    case LossForm::contrastive_subg: return h_cols;
  }
  return h_cols;
}

int LossEvaluator::aux_rows(int z_cols) const {
  return spec_.form == LossForm::contrastive_dgi ? z_cols : 0;
}

int LossEvaluator::aux_cols(int z_cols) const {
  return spec_.form == LossForm::contrastive_dgi ? z_cols : 0;
}

namespace {

Matrix pair_product_rows(const Matrix& h, const std::vector<Edge>& pairs) {
  Matrix phi(static_cast<int>(pairs.size()), h.cols());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto hu = h.row(pairs[p].first);
    auto hv = h.row(pairs[p].second);
    auto dst = phi.row(static_cast<int>(p));
    for (int c = 0; c < h.cols(); ++c) dst[c] = hu[c] * hv[c];
  }
  return phi;
}

void pair_product_backward(const Matrix& h, const std::vector<Edge>& pairs, const Matrix& dphi,
                           Matrix& dh) {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [u, v] = pairs[p];
    auto hu = h.row(u);
    auto hv = h.row(v);
    auto g = dphi.row(static_cast<int>(p));
    auto du = dh.row(u);
    auto dv = dh.row(v);
    for (int c = 0; c < h.cols(); ++c) {
      du[c] += g[c] * hv[c];
      dv[c] += g[c] * hu[c];
    }
  }
}

}  // namespace

Matrix LossEvaluator::features(const Matrix& h) const {
  switch (spec_.id) {
    case TaskId::graphcomp: {
      Matrix phi(static_cast<int>(masked_rows_.size()), h.cols());
      for (std::size_t r = 0; r < masked_rows_.size(); ++r) {
        auto src = h.row(masked_rows_[r]);
        auto dst = phi.row(static_cast<int>(r));
        std::copy(src.begin(), src.end(), dst.begin());
      }
      return phi;
    }
    case TaskId::edgemask: {
      std::vector<Edge> all = pos_pairs_;
      all.insert(all.end(), neg_pairs_.begin(), neg_pairs_.end());
      return pair_product_rows(h, all);
    }
    case TaskId::pairattsim:
      return pair_product_rows(h, sim_pairs_);
    default:
      return h;
  }
}

void LossEvaluator::features_backward(const Matrix& h, const Matrix& dphi, Matrix& dh) const {
  switch (spec_.id) {
    case TaskId::graphcomp: {
      for (std::size_t r = 0; r < masked_rows_.size(); ++r) {
        auto g = dphi.row(static_cast<int>(r));
        auto dst = dh.row(masked_rows_[r]);
        for (int c = 0; c < h.cols(); ++c) dst[c] += g[c];
      }
      return;
    }
    case TaskId::edgemask: {
      std::vector<Edge> all = pos_pairs_;
      all.insert(all.end(), neg_pairs_.begin(), neg_pairs_.end());
      pair_product_backward(h, all, dphi, dh);
      return;
    }
    case TaskId::pairattsim:
      pair_product_backward(h, sim_pairs_, dphi, dh);
      return;
    default:
      dh.add_scaled(dphi, 1.0);
      return;
  }
}

double LossEvaluator::objective(const Matrix& z, const Matrix* aux, Matrix* dz, Matrix* daux) const {
  if (dz) *dz = Matrix(z.rows(), z.cols());
  switch (spec_.form) {
    case LossForm::squared_norm: {
      if (!z.same_shape(target_))
        throw DimensionError("prediction shape does not match target for " + task_name(spec_.id));
      double s = 0.0;
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) {
          double r = z(i, j) - target_(i, j);
          s += r * r;
          if (dz) (*dz)(i, j) = 2.0 * r;
        }
      return s;
    }

    case LossForm::bce_pairs: {
      if (z.cols() != 1) throw DimensionError("pair logits must be a single column");
      std::size_t n_pos = pos_pairs_.size();
      std::size_t total = n_pos + neg_pairs_.size();
      if (static_cast<std::size_t>(z.rows()) != total)
        throw DimensionError("pair logit count does not match frozen pairs");
      double s = 0.0;
      for (std::size_t p = 0; p < total; ++p) {
        int label = p < n_pos ? 1 : 0;
        double prob = sigmoid(z(static_cast<int>(p), 0));
        s += bce_one(prob, label);
        if (dz) (*dz)(static_cast<int>(p), 0) = (prob - label) / total;
      }
      return s / total;
    }

    case LossForm::bce_adjacency: {
      std::size_t total = pos_pairs_.size() + neg_pairs_.size();
      if (total == 0) throw DimensionError("adjacency loss has no pairs");
      double s = 0.0;
      auto score_pairs = [&](const std::vector<Edge>& pairs, int label) {
        for (auto [u, v] : pairs) {
          double a = dot(z.row(u), z.row(v));
          double p = sigmoid(a);
          s += bce_one(p, label);
          if (dz) {
            double g = (p - label) / total;
            auto du = dz->row(u);
            auto dv = dz->row(v);
            auto zu = z.row(u);
            auto zv = z.row(v);
            for (int c = 0; c < z.cols(); ++c) {
              du[c] += g * zv[c];
              dv[c] += g * zu[c];
            }
          }
        }
      };
      score_pairs(pos_pairs_, 1);
      score_pairs(neg_pairs_, 0);
      return s / total;
    }

    case LossForm::contrastive_dgi: {
      if (!aux || aux->rows() != z.cols() || aux->cols() != z.cols())
        throw DimensionError("infomax loss needs a square bilinear head");
      const int n = z.rows(), d = z.cols();
      if (daux) *daux = Matrix(d, d);
      std::vector<double> mu = col_means(z);
      std::vector<double> summ(d), dsig(d);
      for (int q = 0; q < d; ++q) {
        summ[q] = sigmoid(mu[q]);
        dsig[q] = summ[q] * (1.0 - summ[q]);
      }
      std::vector<double> mv(d, 0.0);  // M * s
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) mv[p] += (*aux)(p, q) * summ[q];

      std::vector<double> a(n);
      for (int i = 0; i < n; ++i) a[i] = dot(z.row(i), std::span<const double>(mv));

      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        s += bce_one(sigmoid(a[i]), 1);
        s += bce_one(sigmoid(a[perm_[i]]), 0);
      }
      s /= 2.0 * n;
      if (!dz) return s;

      // Each row appears once as a positive and once (via the permutation)
      // as a negative.
      std::vector<double> ga(n);
      for (int i = 0; i < n; ++i) ga[i] = (2.0 * sigmoid(a[i]) - 1.0) / (2.0 * n);

      std::vector<double> dmv(d, 0.0);
      for (int i = 0; i < n; ++i) {
        auto zi = z.row(i);
        auto gi = dz->row(i);
        for (int c = 0; c < d; ++c) {
          gi[c] += ga[i] * mv[c];
          dmv[c] += ga[i] * zi[c];
        }
      }
      if (daux)
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q) (*daux)(p, q) = dmv[p] * summ[q];
      std::vector<double> dmu(d, 0.0);
      for (int q = 0; q < d; ++q) {
        double ds = 0.0;
        for (int p = 0; p < d; ++p) ds += dmv[p] * (*aux)(p, q);
        dmu[q] = ds * dsig[q] / n;
      }
      for (int i = 0; i < n; ++i) {
        auto gi = dz->row(i);
        for (int q = 0; q < d; ++q) gi[q] += dmu[q];
      }
      return s;
    }

    case LossForm::contrastive_subg: {
      const int n = z.rows(), d = z.cols();
      if (static_cast<int>(subgraphs_.size()) != n)
        throw DimensionError("subgraph count does not match representation rows");
      Matrix centers(n, d);
      for (int i = 0; i < n; ++i) {
        auto ci = centers.row(i);
        for (int u : subgraphs_[i]) {
          auto zu = z.row(u);
          for (int c = 0; c < d; ++c) ci[c] += zu[c];
        }
        for (int c = 0; c < d; ++c) ci[c] /= subgraphs_[i].size();
      }
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        int j = perm_[i];
        double a_pos = dot(z.row(i), centers.row(i));
        double a_neg = dot(z.row(i), centers.row(j));
        double p_pos = sigmoid(a_pos);
        double p_neg = sigmoid(a_neg);
        double hinge = kMargin + p_neg - p_pos;
        if (hinge <= 0.0) continue;
        s += hinge;
        if (!dz) continue;
        double gp = -p_pos * (1.0 - p_pos) / n;
        double gn = p_neg * (1.0 - p_neg) / n;
        auto gi = dz->row(i);
        auto ci = centers.row(i);
        auto cj = centers.row(j);
        auto zi = z.row(i);
        for (int c = 0; c < d; ++c) gi[c] += gp * ci[c] + gn * cj[c];
        for (int u : subgraphs_[i]) {
          auto gu = dz->row(u);
          double w = gp / subgraphs_[i].size();
          for (int c = 0; c < d; ++c) gu[c] += w * zi[c];
        }
        for (int u : subgraphs_[j]) {
          auto gu = dz->row(u);
          double w = gn / subgraphs_[j].size();
          for (int c = 0; c < d; ++c) gu[c] += w * zi[c];
        }
      }
      return s / n;
    }
  }
  throw Error("unhandled loss form");
}

double LossEvaluator::loss(const Matrix& z, const Matrix* aux) const {
  if (spec_.form == LossForm::squared_norm) return std::sqrt(objective(z, aux, nullptr, nullptr));
  return objective(z, aux, nullptr, nullptr);
}

LossEvaluator build_target(const TaskSpec& spec, const Graph& g, const FrozenArtifacts& artifacts) {
  LossEvaluator ev;
  ev.spec_ = spec;
  const Matrix& x = g.features;

  switch (spec.id) {
    case TaskId::graphcomp: {
      ev.masked_rows_ = artifacts.feature_mask;
      Matrix masked(static_cast<int>(ev.masked_rows_.size()), x.cols());
      for (std::size_t r = 0; r < ev.masked_rows_.size(); ++r)
        for (int c = 0; c < x.cols(); ++c) masked(static_cast<int>(r), c) = x(ev.masked_rows_[r], c);
      ev.target_ = zscore_columns(masked);
      break;
    }
    case TaskId::attributemask:
      ev.target_ = zscore_columns(pca_project(x, artifacts.pca_rank));
      break;
    case TaskId::gae:
      ev.pos_pairs_ = g.edges;
      ev.neg_pairs_ = artifacts.negative_edges;
      break;
    case TaskId::edgemask: {
      ev.pos_pairs_ = artifacts.masked_edges;
      std::size_t want = std::min(artifacts.masked_edges.size(), artifacts.negative_edges.size());
      ev.neg_pairs_.assign(artifacts.negative_edges.begin(), artifacts.negative_edges.begin() + want);
      break;
    }
    case TaskId::nodeprop: {
      auto deg = g.degrees();
      Matrix y(g.n_nodes, 1);
      for (int i = 0; i < g.n_nodes; ++i) y(i, 0) = deg[i];
      ev.target_ = zscore_columns(y);
      break;
    }
    case TaskId::discluster: {
      int k = static_cast<int>(artifacts.cluster_centers.size());
      int sentinel = graph_diameter(g) + 1;  // finite stand-in for unreachable
      Matrix y(g.n_nodes, k);
      for (int c = 0; c < k; ++c) {
        auto dist = bfs_distances(g, artifacts.cluster_centers[c]);
        for (int i = 0; i < g.n_nodes; ++i) y(i, c) = dist[i] < 0 ? sentinel : dist[i];
      }
      ev.target_ = zscore_columns(y);
      break;
    }
    case TaskId::dgi:
      ev.perm_ = artifacts.corruption_perm;
      break;
    case TaskId::subgcon:
      ev.subgraphs_ = artifacts.subgraph_samples;
      ev.perm_ = artifacts.corruption_perm;  // frozen shuffled pairing for negatives
      break;
    case TaskId::pairattsim: {
      ev.sim_pairs_ = artifacts.attr_pairs;
      Matrix y(static_cast<int>(ev.sim_pairs_.size()), 1);
      for (std::size_t p = 0; p < ev.sim_pairs_.size(); ++p) {
        auto xu = x.row(ev.sim_pairs_[p].first);
        auto xv = x.row(ev.sim_pairs_[p].second);
        double nu = std::sqrt(dot(xu, xu));
        double nv = std::sqrt(dot(xv, xv));
        y(static_cast<int>(p), 0) = (nu < 1e-12 || nv < 1e-12) ? 0.0 : dot(xu, xv) / (nu * nv);
      }
      ev.target_ = zscore_columns(y);
      break;
    }
  }
  return ev;
}

double eval_loss(const LossEvaluator& ev, const Matrix& h, const Matrix& w, const Matrix* aux_head) {
  Matrix z = matmul(ev.features(h), w);
  return ev.loss(z, aux_head);
}

HeadFit fit_head(const LossEvaluator& ev, const Matrix& h, const OptimizerConfig& opts, Rng rng) {
  Matrix phi = ev.features(h);
  EvaluatorObjective obj(ev);
  return linear_head_fit(phi, obj, ev.head_cols(h.cols()), opts, rng);
}

double dgi_two_view_objective(const Matrix& z, const Matrix& z_neg, const Matrix& m,
                              Matrix* dz, Matrix* dz_neg, Matrix* dm) {
  const int n = z.rows(), d = z.cols();
  if (!z.same_shape(z_neg) || m.rows() != d || m.cols() != d)
    throw DimensionError("dgi_two_view_objective: shape mismatch");
  if (dz) *dz = Matrix(n, d);
  if (dz_neg) *dz_neg = Matrix(n, d);
  if (dm) *dm = Matrix(d, d);

  std::vector<double> mu = col_means(z);
  std::vector<double> summ(d), dsig(d);
  for (int q = 0; q < d; ++q) {
    summ[q] = sigmoid(mu[q]);
    dsig[q] = summ[q] * (1.0 - summ[q]);
  }
  std::vector<double> mv(d, 0.0);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) mv[p] += m(p, q) * summ[q];

  double s = 0.0;
  std::vector<double> dmv(d, 0.0);
  for (int i = 0; i < n; ++i) {
    double a = dot(z.row(i), std::span<const double>(mv));
    double b = dot(z_neg.row(i), std::span<const double>(mv));
    double pa = sigmoid(a), pb = sigmoid(b);
    s += bce_one(pa, 1) + bce_one(pb, 0);
    if (!dz) continue;
    double ga = (pa - 1.0) / (2.0 * n);
    double gb = pb / (2.0 * n);
    auto zi = z.row(i);
    auto zni = z_neg.row(i);
    auto gi = dz->row(i);
    auto gni = dz_neg->row(i);
    for (int c = 0; c < d; ++c) {
      gi[c] += ga * mv[c];
      gni[c] += gb * mv[c];
      dmv[c] += ga * zi[c] + gb * zni[c];
    }
  }
  s /= 2.0 * n;
  if (!dz) return s;

  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) (*dm)(p, q) = dmv[p] * summ[q];
  for (int q = 0; q < d; ++q) {
    double ds = 0.0;
    for (int p = 0; p < d; ++p) ds += dmv[p] * m(p, q);
    double dmu = ds * dsig[q] / n;
    for (int i = 0; i < n; ++i) (*dz)(i, q) += dmu;
  }
  return s;
}

}  // namespace tcm
