#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tcm/rng.hpp"

namespace tcm {

enum class SuiteKind {
  gradients,       // finite-difference checks for every optimized loss
  bounds_pair,     // pairwise transfer bound on random regression instances
  bounds_multi,    // multi-task bound on random instances
  auc_oracle,      // rank-statistic AUC vs exhaustive pair counting
  pca_oracle,      // projection vs an independent power-iteration eigensolver
  determinism,     // identical seeds produce identical serialized artifacts
  ablation_order,  // full variant beats each ablation on synthetic targets
};

SuiteKind suite_from_string(const std::string& s);
std::string suite_name(SuiteKind k);
const std::vector<SuiteKind>& all_suites();

struct SuiteFailure {
  std::uint64_t seed;  // replaying the suite with this seed reproduces the failure
  std::string what;
};

struct SuiteReport {
  std::string suite;
  int cases = 0;
  std::vector<SuiteFailure> failures;
  double elapsed_s = 0.0;

  bool ok() const { return failures.empty(); }
};

SuiteReport run_suite(SuiteKind kind, int trials, Rng rng);

std::string suite_report_to_json(const SuiteReport& r);

struct GradCheckResult {
  double max_err = 0.0;
  int worst_index = -1;
};

// Central finite differences over `params`, compared against `analytic`.
// Error per coordinate is |fd - analytic| / max(1, |fd|, |analytic|).
GradCheckResult check_gradient(const std::function<double()>& eval, std::span<double> params,
                               std::span<const double> analytic, double step = 1e-5);

}  // namespace tcm
