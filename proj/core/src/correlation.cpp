#include "tcm/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tcm/errors.hpp"
#include "tcm/linalg.hpp"

namespace tcm {

using nlohmann::json;

CorrelationMatrix CorrelationMatrix::submatrix(const std::vector<int>& keep) const {
  CorrelationMatrix sub;
  sub.fingerprint = fingerprint;
  sub.degenerate_denominator = degenerate_denominator;
  sub.values = Matrix(static_cast<int>(keep.size()), static_cast<int>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    sub.tasks.push_back(tasks[keep[a]]);
    sub.denominators.push_back(denominators[keep[a]]);
    for (std::size_t b = 0; b < keep.size(); ++b)
      sub.values(static_cast<int>(a), static_cast<int>(b)) = values(keep[a], keep[b]);
  }
  return sub;
}

CorrelationValue correlation_value(const Matrix& h1, const LossEvaluator& ev2, const Matrix& h2,
                                   const OptimizerConfig& opts, Rng rng, bool shared_seed) {
  if (h1.rows() != h2.rows()) throw DimensionError("correlation_value: row counts differ");
  Rng den_rng = rng.child(std::uint64_t{0});
  Rng num_rng = shared_seed ? den_rng : rng.child(std::uint64_t{1});
  double den = fit_head(ev2, h2, opts, den_rng).final_loss;
  double num = fit_head(ev2, h1, opts, num_rng).final_loss;
  bool degenerate = den < kDenominatorFloor;
  return {num / std::max(den, kDenominatorFloor), degenerate};
}

CorrelationMatrix correlation_matrix(const std::vector<Representation>& reps,
                                     const std::vector<LossEvaluator>& evaluators,
                                     const OptimizerConfig& opts, Rng rng,
                                     const std::string& fingerprint) {
  const int k = static_cast<int>(reps.size());
  if (k == 0 || evaluators.size() != reps.size())
    throw DimensionError("correlation_matrix: representations and evaluators must pair up");
  for (const auto& r : reps)
    if (r.matrix.rows() != reps[0].matrix.rows())
      throw DimensionError("correlation_matrix: inconsistent node counts");

  CorrelationMatrix cm;
  cm.fingerprint = fingerprint;
  cm.values = Matrix(k, k);
  cm.denominators.resize(k);
  for (int i = 0; i < k; ++i) cm.tasks.push_back(evaluators[i].id());

  // One denominator fit per evaluated task, reused down its column.
  for (int j = 0; j < k; ++j) {
    Rng den_rng = rng.child(static_cast<std::uint64_t>(j));
    cm.denominators[j] = fit_head(evaluators[j], reps[j].matrix, opts, den_rng).final_loss;
    if (cm.denominators[j] < kDenominatorFloor) cm.degenerate_denominator = true;
  }

  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double num;
      if (i == j) {
        num = cm.denominators[j];  // same representation, same seed, same fit
      } else {
        Rng num_rng = rng.child(static_cast<std::uint64_t>(k + i * k + j));
        num = fit_head(evaluators[j], reps[i].matrix, opts, num_rng).final_loss;
      }
      cm.values(i, j) = num / std::max(cm.denominators[j], kDenominatorFloor);
    }
  }
  return cm;
}

double atd(const CorrelationMatrix& cm, int i) {
  const int k = cm.size();
  if (k < 2) throw StatError("task difficulty is undefined for a single task");
  double s = 0.0;
  for (int j = 0; j < k; ++j)
    if (j != i) s += cm.values(j, i);
  return s / (k - 1);
}

double arl(const CorrelationMatrix& cm, int i) {
  const int k = cm.size();
  if (k < 2) throw StatError("relative loss is undefined for a single task");
  double s = atd(cm, i);
  for (int j = 0; j < k; ++j)
    if (j != i) s += cm.values(i, j);
  return s / k;
}

namespace {

// rank 1 goes to the extreme value; ties broken by task order.
std::vector<int> rank_values(const std::vector<double>& v, bool descending) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return descending ? v[a] > v[b] : v[a] < v[b];
  });
  std::vector<int> rank(v.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r) + 1;
  return rank;
}

}  // namespace

TaskStats task_stats(const CorrelationMatrix& cm) {
  TaskStats st;
  for (int i = 0; i < cm.size(); ++i) {
    st.atd.push_back(atd(cm, i));
    st.arl.push_back(arl(cm, i));
  }
  st.atd_rank = rank_values(st.atd, true);
  st.arl_rank = rank_values(st.arl, false);
  return st;
}

std::vector<double> external_correlations(const Matrix& h, const std::vector<LossEvaluator>& evaluators,
                                          const std::vector<double>& denominators,
                                          const OptimizerConfig& opts, Rng rng) {
  if (evaluators.size() != denominators.size())
    throw DimensionError("external_correlations: evaluator/denominator mismatch");
  std::vector<double> out(evaluators.size());
  for (std::size_t j = 0; j < evaluators.size(); ++j) {
    Rng num_rng = rng.child(j);
    double num = fit_head(evaluators[j], h, opts, num_rng).final_loss;
    out[j] = num / std::max(denominators[j], kDenominatorFloor);
  }
  return out;
}

double arl_external(const std::vector<double>& cors) {
  if (cors.empty()) throw StatError("relative loss needs at least one task");
  double s = 0.0;
  for (double c : cors) s += c;
  return s / cors.size();
}

BoundReport verify_pair_bound(const Matrix& h1, const Matrix& h2, const Matrix& y_t2,
                              const Matrix& y_ds, double ridge) {
  auto n1 = least_squares_closed(h1, y_t2, ridge);
  auto d2 = least_squares_closed(h2, y_t2, ridge);
  auto e1 = least_squares_closed(h1, y_ds, ridge);
  auto e2 = least_squares_closed(h2, y_ds, ridge);

  BoundReport r;
  r.cor = n1.residual / std::max(d2.residual, kDenominatorFloor);
  r.lhs = e1.residual;
  double y_gap = frobenius_distance(y_t2, y_ds);
  double head_gap = frobenius_distance(matmul(h2, e2.w), matmul(h2, d2.w));
  r.delta = y_gap + head_gap;
  r.rhs = r.cor * (e2.residual + r.delta) + y_gap;
  r.holds = r.lhs <= r.rhs + kBoundSlack;
  return r;
}

BoundReport verify_multi_bound(const std::vector<Matrix>& reps, const std::vector<Matrix>& targets,
                               const Matrix& y_ds, const Matrix& h_new, double ridge) {
  if (reps.empty() || reps.size() != targets.size())
    throw DimensionError("verify_multi_bound: representations and targets must pair up");

  BoundReport r;
  r.lhs = least_squares_closed(h_new, y_ds, ridge).residual;
  r.e_min = std::numeric_limits<double>::infinity();
  r.beta = 0.0;
  r.delta_bound = 0.0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    auto own = least_squares_closed(reps[i], targets[i], ridge);
    auto ds = least_squares_closed(reps[i], y_ds, ridge);
    double y_gap = frobenius_distance(targets[i], y_ds);
    double head_gap = frobenius_distance(matmul(reps[i], ds.w), matmul(reps[i], own.w));
    r.beta = std::max(r.beta, y_gap + head_gap);
    r.e_min = std::min(r.e_min, ds.residual);
    double num = least_squares_closed(h_new, targets[i], ridge).residual;
    r.delta_bound = std::max(r.delta_bound, num / std::max(own.residual, kDenominatorFloor));
  }
  r.rhs = r.delta_bound * (r.e_min + r.beta) + r.beta;
  r.holds = r.lhs <= r.rhs + kBoundSlack;
  return r;
}

std::string correlation_to_json(const CorrelationMatrix& cm) {
  json j;
  json names = json::array();
  for (TaskId t : cm.tasks) names.push_back(task_name(t));
  j["tasks"] = std::move(names);
  j["values"] = cm.values.data();
  j["denominators"] = cm.denominators;
  j["config"] = cm.fingerprint;
  j["degenerate_denominator"] = cm.degenerate_denominator;
  return j.dump(2) + "\n";
}

CorrelationMatrix correlation_from_json(const std::string& text) {
  json j = json::parse(text);
  CorrelationMatrix cm;
  for (const auto& n : j.at("tasks")) cm.tasks.push_back(task_from_string(n.get<std::string>()));
  int k = static_cast<int>(cm.tasks.size());
  cm.values = Matrix(k, k, j.at("values").get<std::vector<double>>());
  cm.denominators = j.at("denominators").get<std::vector<double>>();
  cm.fingerprint = j.value("config", "");
  cm.degenerate_denominator = j.value("degenerate_denominator", false);
  return cm;
}

std::string correlation_to_csv(const CorrelationMatrix& cm) {
  std::string out = "train\\eval";
  for (TaskId t : cm.tasks) out += "," + task_name(t);
  out += "\n";
  char buf[40];
  for (int i = 0; i < cm.size(); ++i) {
    out += task_name(cm.tasks[i]);
    for (int j = 0; j < cm.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", cm.values(i, j));
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void save_correlation(const CorrelationMatrix& cm, const std::string& json_path) {
  std::ofstream out(json_path);
  if (!out) throw Error("cannot write " + json_path);
  out << correlation_to_json(cm);
}

CorrelationMatrix load_correlation(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ParseError("cannot open correlation file: " + json_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return correlation_from_json(text);
}

}  // namespace tcm
