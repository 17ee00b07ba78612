#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tcm/config.hpp"
#include "tcm/errors.hpp"
#include "tcm/pipeline.hpp"
#include "tcm/verify.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string tasks;
  std::string stages;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
  auto* opt = cmd->add_option("--config", f.config_path, "run configuration (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", f.out_dir, "output directory (overrides out_dir in the config)");
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--tasks", f.tasks, "comma-separated task ids (overrides the config)");
  cmd->add_option("--stages", f.stages, "comma-separated stage list to run instead of the default");
}

// Flag overrides are applied to the raw document so defaults resolve once,
// in one place.
tcm::RunConfig load_config(const CommonFlags& f) {
  std::ifstream in(f.config_path);
  if (!in) throw tcm::ConfigError("cannot open config file: " + f.config_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw tcm::ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  if (f.seed) j["seed"] = *f.seed;
  if (!f.out_dir.empty()) j["out_dir"] = f.out_dir;
  if (!f.tasks.empty()) {
    nlohmann::json tasks = nlohmann::json::array();
    std::stringstream ss(f.tasks);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) tasks.push_back(item);
    j["tasks"] = std::move(tasks);
  }
  return tcm::parse_config_text(j.dump());
}

int run_stage_command(const CommonFlags& f, tcm::Stage default_stage) {
  tcm::RunConfig cfg = load_config(f);
  std::set<tcm::Stage> stages;
  if (f.stages.empty()) {
    stages.insert(default_stage);
  } else {
    for (tcm::Stage s : tcm::parse_stage_list(f.stages)) stages.insert(s);
  }
  return tcm::run_pipeline(cfg, stages);
}

int run_verify(const std::string& suite, int trials, std::uint64_t seed) {
  std::vector<tcm::SuiteKind> kinds;
  if (suite == "all") {
    kinds = tcm::all_suites();
  } else {
    kinds.push_back(tcm::suite_from_string(suite));
  }
  bool all_ok = true;
  std::cout << "[\n";
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    int n = trials;
    if (trials <= 0) {
      switch (kinds[i]) {
        case tcm::SuiteKind::gradients: n = 50; break;
        case tcm::SuiteKind::bounds_pair: n = 200; break;
        case tcm::SuiteKind::bounds_multi: n = 100; break;
        case tcm::SuiteKind::auc_oracle: n = 100; break;
        case tcm::SuiteKind::pca_oracle: n = 100; break;
        case tcm::SuiteKind::determinism: n = 10; break;
        case tcm::SuiteKind::ablation_order: n = 3; break;
      }
    }
    tcm::SuiteReport r = tcm::run_suite(kinds[i], n, tcm::Rng(seed).child(tcm::suite_name(kinds[i]).c_str()));
    all_ok = all_ok && r.ok();
    std::string doc = tcm::suite_report_to_json(r);
    if (!doc.empty() && doc.back() == '\n') doc.pop_back();
    std::cout << doc << (i + 1 < kinds.size() ? ",\n" : "\n");
  }
  std::cout << "]\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-correlation laboratory for graph self-supervised learning"};
  app.require_subcommand(1);

  CommonFlags train_f, correlate_f, tcm_f, enhance_f, evaluate_f;
  auto* train = app.add_subcommand("train", "train one representation per task");
  add_common(train, train_f);
  auto* correlate = app.add_subcommand("correlate", "compute the cross-task correlation matrix");
  add_common(correlate, correlate_f);
  auto* tcm_cmd = app.add_subcommand("tcm", "fit the correlation model to a persisted matrix");
  add_common(tcm_cmd, tcm_f);
  auto* enhance = app.add_subcommand("enhance", "train the mixing weights for an enhanced representation");
  add_common(enhance, enhance_f);
  auto* evaluate = app.add_subcommand("evaluate", "linear probes and link prediction for all methods");
  add_common(evaluate, evaluate_f);

  std::string report_dir;
  std::string report_config;
  auto* report = app.add_subcommand("report", "emit heatmap CSV and ATD/ARL ranking tables");
  report->add_option("--out", report_dir, "artifact directory holding cor.json");
  report->add_option("--config", report_config, "config whose out_dir holds cor.json");

  std::string suite = "all";
  int trials = 0;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify-bounds", "run the randomized property suites");
  verify->add_option("--suite", suite, "suite name or \"all\"");
  verify->add_option("--trials", trials, "trial count (0 = per-suite default)");
  verify->add_option("--seed", verify_seed, "seed for the randomized suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_stage_command(train_f, tcm::Stage::train);
    if (correlate->parsed()) return run_stage_command(correlate_f, tcm::Stage::correlate);
    if (tcm_cmd->parsed()) return run_stage_command(tcm_f, tcm::Stage::tcm);
    if (enhance->parsed()) return run_stage_command(enhance_f, tcm::Stage::enhance);
    if (evaluate->parsed()) return run_stage_command(evaluate_f, tcm::Stage::evaluate);
    if (report->parsed()) {
      std::string dir = report_dir;
      if (dir.empty() && !report_config.empty()) dir = tcm::parse_config(report_config).out_dir;
      if (dir.empty()) throw tcm::ConfigError("report needs --out or --config");
      tcm::emit_report(dir);
      return 0;
    }
    if (verify->parsed()) return run_verify(suite, trials, verify_seed);
  } catch (const tcm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
