#pragma once

#include <string>
#include <vector>

#include "tcm/encoder.hpp"
#include "tcm/matrix.hpp"
#include "tcm/optim.hpp"
#include "tcm/tasks.hpp"

namespace tcm {

// k x k correlation values. values(i, j) is the relative loss of task i's
// representation evaluated on task j's objective: row = training task,
// column = evaluated task.
struct CorrelationMatrix {
  std::vector<TaskId> tasks;
  Matrix values;
  std::vector<double> denominators;  // each task's own-representation loss
  std::string fingerprint;           // seed/config stamp for reproducibility
  bool degenerate_denominator = false;

  int size() const { return static_cast<int>(tasks.size()); }
  CorrelationMatrix submatrix(const std::vector<int>& keep) const;
};

struct TaskStats {
  std::vector<double> atd;
  std::vector<double> arl;
  std::vector<int> atd_rank;  // 1 = hardest task (largest ATD)
  std::vector<int> arl_rank;  // 1 = most capable representation (smallest ARL)
};

inline constexpr double kDenominatorFloor = 1e-9;

struct CorrelationValue {
  double value;
  bool degenerate;  // denominator hit the floor
};

// Formula ratio: numerator fits a head for h1 on ev2's objective, the
// denominator fits one for h2 (the task's own representation), both with the
// identical optimizer budget. Seeds split off `rng`: child 0 drives the
// denominator head, child 1 the numerator head. With h1 == h2 and
// `shared_seed` the two fits coincide and the ratio is exactly 1.
CorrelationValue correlation_value(const Matrix& h1, const LossEvaluator& ev2, const Matrix& h2,
                                   const OptimizerConfig& opts, Rng rng, bool shared_seed = false);

// All k^2 entries; each task's denominator is fit once and reused down its
// column, so diagonal entries are exactly 1.
CorrelationMatrix correlation_matrix(const std::vector<Representation>& reps,
                                     const std::vector<LossEvaluator>& evaluators,
                                     const OptimizerConfig& opts, Rng rng,
                                     const std::string& fingerprint = "");

// Column-i off-diagonal mean: how hard task i is for the other tasks.
double atd(const CorrelationMatrix& cm, int i);
// (ATD_i + row-i off-diagonal sum) / k: lower means better transfer.
double arl(const CorrelationMatrix& cm, int i);
TaskStats task_stats(const CorrelationMatrix& cm);

// Relative losses of an external representation (one not in the task set) on
// every task, reusing the matrix's denominators.
std::vector<double> external_correlations(const Matrix& h, const std::vector<LossEvaluator>& evaluators,
                                          const std::vector<double>& denominators,
                                          const OptimizerConfig& opts, Rng rng);
// ARL of an external representation: plain mean of its relative losses (it
// has no task of its own, so no difficulty adjustment applies).
double arl_external(const std::vector<double>& cors);

struct BoundReport {
  double lhs = 0.0;          // downstream error of the bounded representation
  double rhs = 0.0;
  double cor = 0.0;          // pairwise bound only
  double delta = 0.0;        // pairwise bound only
  double beta = 0.0;         // multi-task bound only
  double delta_bound = 0.0;  // multi-task bound only
  double e_min = 0.0;        // multi-task bound only
  bool holds = false;
};

inline constexpr double kBoundSlack = 1e-9;

// Pairwise transfer bound with every head solved in closed form:
//   e1 <= Cor(1,2) * (e2 + delta) + ||Y2 - Yds||.
BoundReport verify_pair_bound(const Matrix& h1, const Matrix& h2, const Matrix& y_t2,
                              const Matrix& y_ds, double ridge = 0.0);

// Multi-task bound for a new representation:
//   e' <= delta * (e_min + beta) + beta.
BoundReport verify_multi_bound(const std::vector<Matrix>& reps, const std::vector<Matrix>& targets,
                               const Matrix& y_ds, const Matrix& h_new, double ridge = 0.0);

std::string correlation_to_json(const CorrelationMatrix& cm);
CorrelationMatrix correlation_from_json(const std::string& text);
std::string correlation_to_csv(const CorrelationMatrix& cm);
void save_correlation(const CorrelationMatrix& cm, const std::string& json_path);
CorrelationMatrix load_correlation(const std::string& json_path);

}  // namespace tcm
