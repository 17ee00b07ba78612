#include "tcm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "tcm/errors.hpp"

namespace tcm {

using nlohmann::json;

namespace {

constexpr double kPreluSlope = 0.25;

double act_forward(double z, Activation a) {
  switch (a) {
    case Activation::none: return z;
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::prelu: return z > 0 ? z : kPreluSlope * z;
  }
  return z;
}

double act_grad(double z, Activation a) {
  switch (a) {
    case Activation::none: return 1.0;
    case Activation::relu: return z > 0 ? 1.0 : 0.0;
    case Activation::prelu: return z > 0 ? 1.0 : kPreluSlope;
  }
  return 1.0;
}

Matrix glorot(int rows, int cols, Rng& rng) {
  double limit = std::sqrt(6.0 / (rows + cols));
  Matrix w(rows, cols);
  for (auto& x : w.data()) x = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& cfg, int in_dim, Rng& rng) {
  if (cfg.embed_dim < 1) throw ParamError("embed_dim must be >= 1");
  if (cfg.n_gcn + cfg.n_linear < 1) throw ParamError("encoder needs at least one layer");
  EncoderParams p;
  p.embed_dim = cfg.embed_dim;
  int total = cfg.n_gcn + cfg.n_linear;
  int in = in_dim;
  Activation hidden = cfg.prelu ? Activation::prelu : Activation::relu;
  for (int l = 0; l < total; ++l) {
    EncoderLayer layer;
    layer.kind = l < cfg.n_gcn ? LayerKind::gcn : LayerKind::linear;
    layer.w = glorot(in, cfg.embed_dim, rng);
    layer.b.assign(cfg.embed_dim, 0.0);
    layer.act = l + 1 < total ? hidden : Activation::none;
    p.layers.push_back(std::move(layer));
    in = cfg.embed_dim;
  }
  return p;
}

Matrix encode_cached(const EncoderParams& params, const Matrix& a_hat, const Matrix& x,
                     EncoderCache& cache) {
  cache.inputs.clear();
  cache.preacts.clear();
  Matrix h = x;
  for (const auto& layer : params.layers) {
    if (h.cols() != layer.w.rows()) throw DimensionError("encode: layer dimensions do not chain");
    cache.inputs.push_back(h);
    Matrix z = matmul(h, layer.w);
    if (layer.kind == LayerKind::gcn) z = matmul(a_hat, z);
    for (int i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (int j = 0; j < z.cols(); ++j) row[j] += layer.b[j];
    }
    cache.preacts.push_back(z);
    if (layer.act != Activation::none)
      for (auto& v : z.data()) v = act_forward(v, layer.act);
    h = std::move(z);
  }
  return h;
}

Matrix encode(const EncoderParams& params, const Matrix& a_hat, const Matrix& x) {
  EncoderCache cache;
  return encode_cached(params, a_hat, x, cache);
}

void EncoderGrads::accumulate(const EncoderGrads& other) {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    dw[l].add_scaled(other.dw[l], 1.0);
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += other.db[l][i];
  }
}

EncoderGrads encoder_backward(const EncoderParams& params, const Matrix& a_hat,
                              const EncoderCache& cache, const Matrix& d_out) {
  EncoderGrads g;
  g.dw.resize(params.layers.size());
  g.db.resize(params.layers.size());
  Matrix d = d_out;
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = params.layers[l];
    const Matrix& z = cache.preacts[l];
    if (layer.act != Activation::none)
      for (int i = 0; i < d.rows(); ++i) {
        auto drow = d.row(i);
        auto zrow = z.row(i);
        for (int j = 0; j < d.cols(); ++j) drow[j] *= act_grad(zrow[j], layer.act);
      }
    g.db[l] = col_sums(d);
    Matrix dm = layer.kind == LayerKind::gcn ? matmul(a_hat, d) : std::move(d);
    g.dw[l] = matmul_tn(cache.inputs[l], dm);
    if (l > 0) d = matmul_nt(dm, layer.w);
  }
  return g;
}

namespace {

struct ParamBinding {
  std::vector<std::span<double>> params;
  std::vector<std::size_t> ids;

  void bind(Optimizer& opt, EncoderParams& enc, Matrix* head, Matrix* aux) {
    for (auto& layer : enc.layers) {
      ids.push_back(opt.add_param(layer.w.size()));
      params.push_back(layer.w.data());
      ids.push_back(opt.add_param(layer.b.size()));
      params.push_back(layer.b);
    }
    if (head && head->size() > 0) {
      ids.push_back(opt.add_param(head->size()));
      params.push_back(head->data());
    }
    if (aux && aux->size() > 0) {
      ids.push_back(opt.add_param(aux->size()));
      params.push_back(aux->data());
    }
  }

  void step(Optimizer& opt, const EncoderGrads& g, const Matrix* dhead, const Matrix* daux) {
    opt.begin_epoch();
    std::size_t k = 0;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
      opt.update(ids[k], params[k], g.dw[l].data());
      ++k;
      opt.update(ids[k], params[k], g.db[l]);
      ++k;
    }
    if (dhead) {
      opt.update(ids[k], params[k], dhead->data());
      ++k;
    }
    if (daux) opt.update(ids[k], params[k], daux->data());
  }
};

}  // namespace

TrainResult train_ssl(TaskId task, const Graph& g, const FrozenArtifacts& artifacts,
                      const EncoderConfig& arch, const OptimizerConfig& opts, Rng rng) {
  opts.validate();
  LossEvaluator ev = build_target(task, g, artifacts);

  Matrix a_hat_full = normalize_adjacency(g);
  Matrix a_hat_train = task == TaskId::edgemask
                           ? normalize_adjacency_without(g, artifacts.masked_edges)
                           : a_hat_full;

  EncoderParams enc = init_encoder(arch, g.feat_dim(), rng);

  const int d = arch.embed_dim;
  const bool has_linear_head = ev.form() == LossForm::squared_norm || ev.form() == LossForm::bce_pairs;
  const bool is_dgi = ev.form() == LossForm::contrastive_dgi;

  Matrix head;
  if (has_linear_head) {
    double limit = std::sqrt(6.0 / (d + ev.head_cols(d)));
    head = Matrix(d, ev.head_cols(d));
    for (auto& x : head.data()) x = rng.uniform(-limit, limit);
  }
  Matrix disc;  // bilinear discriminator, trained jointly and then discarded
  if (is_dgi) {
    double scale = 0.1 / std::sqrt(static_cast<double>(d));
    disc = Matrix(d, d);
    for (auto& x : disc.data()) x = rng.uniform(-scale, scale);
  }

  Matrix x_corrupt;
  if (is_dgi) x_corrupt = corrupt_features(g.features, artifacts.corruption_perm);

  Optimizer opt(opts);
  ParamBinding binding;
  binding.bind(opt, enc, has_linear_head ? &head : nullptr, is_dgi ? &disc : nullptr);

  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  EncoderParams best_enc = enc;
  Matrix best_disc = disc;
  int stall = 0;

  EncoderCache cache, cache_neg;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    Matrix h = encode_cached(enc, a_hat_train, g.features, cache);
    double obj;
    EncoderGrads grads;
    Matrix dhead, daux;

    if (is_dgi) {
      Matrix h_neg = encode_cached(enc, a_hat_train, x_corrupt, cache_neg);
      Matrix dh, dh_neg;
      obj = dgi_two_view_objective(h, h_neg, disc, &dh, &dh_neg, &daux);
      grads = encoder_backward(enc, a_hat_train, cache, dh);
      grads.accumulate(encoder_backward(enc, a_hat_train, cache_neg, dh_neg));
    } else if (has_linear_head) {
      Matrix phi = ev.features(h);
      Matrix z = matmul(phi, head);
      Matrix dz;
      obj = ev.objective(z, nullptr, &dz, nullptr);
      dhead = matmul_tn(phi, dz);
      Matrix dphi = matmul_nt(dz, head);
      Matrix dh(h.rows(), h.cols());
      ev.features_backward(h, dphi, dh);
      grads = encoder_backward(enc, a_hat_train, cache, dh);
    } else {
      Matrix dz;
      obj = ev.objective(h, nullptr, &dz, nullptr);
      grads = encoder_backward(enc, a_hat_train, cache, dz);
    }

    check_divergence(obj, epoch, ("training " + task_name(task)).c_str());
    result.loss_curve.push_back(obj);
    result.epochs_run = epoch;

    if (arch.early_stop) {
      if (obj < best_loss - 1e-12) {
        best_loss = obj;
        best_enc = enc;
        best_disc = disc;
        stall = 0;
      } else if (++stall >= arch.patience) {
        enc = best_enc;
        disc = best_disc;
        break;
      }
    }

    binding.step(opt, grads, has_linear_head ? &dhead : nullptr, is_dgi ? &daux : nullptr);
  }

  if (arch.early_stop && best_loss < std::numeric_limits<double>::infinity() &&
      result.loss_curve.back() > best_loss) {
    enc = best_enc;
    disc = best_disc;
  }

  // Final reported loss under the training view, then export the
  // representation from the full graph with the task head discarded.
  {
    Matrix h = encode(enc, a_hat_train, g.features);
    if (is_dgi) {
      Matrix h_neg = encode(enc, a_hat_train, x_corrupt);
      result.final_loss = dgi_two_view_objective(h, h_neg, disc, nullptr, nullptr, nullptr);
    } else if (has_linear_head) {
      result.final_loss = ev.loss(matmul(ev.features(h), head), nullptr);
    } else {
      result.final_loss = ev.loss(h, nullptr);
    }
  }

  result.rep.matrix = encode(enc, a_hat_full, g.features);
  result.rep.matrix.require_finite("trained representation");
  result.rep.task = task_name(task);
  result.rep.seed = rng.seed();
  result.rep.dataset = g.name;
  return result;
}

EncoderConfig default_encoder_config(TaskId task, int embed_dim) {
  EncoderConfig c;
  c.embed_dim = embed_dim;
  switch (task) {
    case TaskId::graphcomp: c.n_gcn = 0; c.n_linear = 3; break;
    case TaskId::gae: c.n_gcn = 2; c.n_linear = 0; break;
    case TaskId::dgi: c.n_gcn = 1; c.n_linear = 1; c.prelu = true; c.early_stop = true; break;
    case TaskId::subgcon: c.n_gcn = 1; c.n_linear = 0; break;
    default: c.n_gcn = 1; c.n_linear = 1; break;
  }
  return c;
}

OptimizerConfig default_optimizer_config(TaskId task, const std::string& dataset_name) {
  OptimizerConfig o;
  o.kind = OptimizerKind::adam;
  switch (task) {
    case TaskId::graphcomp:
      o.learning_rate = 0.008;
      o.weight_decay = 8e-5;
      o.epochs = 500;
      if (dataset_name == "citeseer") {
        o.learning_rate = 5e-4;
        o.weight_decay = 0.7;
      } else if (dataset_name == "pubmed") {
        o.learning_rate = 5e-4;
        o.weight_decay = 0.5;
      }
      break;
    case TaskId::attributemask:
    case TaskId::edgemask:
    case TaskId::nodeprop:
    case TaskId::discluster:
    case TaskId::pairattsim:
      o.learning_rate = 0.001;
      o.weight_decay = 5e-4;
      o.epochs = 200;
      break;
    case TaskId::gae:
      o.learning_rate = 0.01;
      o.weight_decay = 0.0;
      o.epochs = 500;
      break;
    case TaskId::dgi:
      o.learning_rate = 0.001;
      o.weight_decay = 0.0;
      o.epochs = 500;  // early stopping usually ends training well before this
      break;
    case TaskId::subgcon:
      o.learning_rate = 0.001;
      o.weight_decay = 0.0;
      o.epochs = 50;
      break;
  }
  return o;
}

std::string representation_to_json(const Representation& r) {
  json j;
  j["task"] = r.task;
  j["seed"] = r.seed;
  j["dataset"] = r.dataset;
  j["rows"] = r.matrix.rows();
  j["cols"] = r.matrix.cols();
  j["data"] = r.matrix.data();
  return j.dump(2) + "\n";
}

Representation representation_from_json(const std::string& text) {
  json j = json::parse(text);
  Representation r;
  r.task = j.at("task").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.dataset = j.at("dataset").get<std::string>();
  r.matrix = Matrix(j.at("rows").get<int>(), j.at("cols").get<int>(),
                    j.at("data").get<std::vector<double>>());
  return r;
}

void save_representation(const Representation& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << representation_to_json(r);
}

Representation load_representation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open representation file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return representation_from_json(text);
}

}  // namespace tcm
