#pragma once

#include <set>
#include <string>
#include <vector>

#include "tcm/config.hpp"

namespace tcm {

enum class Stage { train, correlate, tcm, enhance, evaluate };

Stage stage_from_string(const std::string& s);
std::string stage_name(Stage s);
std::vector<Stage> parse_stage_list(const std::string& comma_separated);

// Executes the requested stages in pipeline order against cfg.out_dir,
// persisting every stage artifact (representations, correlation matrix,
// model, enhanced representation, results). Later stages restart from
// persisted artifacts; a missing prerequisite is a dependency error.
// Returns 0 on success, 1 on runtime failure, 2 on usage/config errors
// (messages go to stderr).
int run_pipeline(const RunConfig& cfg, const std::set<Stage>& stages);

// Same, but throws instead of mapping exceptions to exit codes.
void run_pipeline_checked(const RunConfig& cfg, const std::set<Stage>& stages);

// Writes cor_heatmap.csv, stats.csv and summary.json from a persisted
// correlation matrix. Throws DependencyError when cor.json is absent.
void emit_report(const std::string& artifact_dir);

// write-temp-then-rename so partially written artifacts never appear.
void atomic_write(const std::string& path, const std::string& content);
std::string fnv1a_hex(const std::string& bytes);
std::string checksum_file(const std::string& path);

// Full-precision decimal rendering shared by all CSV emitters.
std::string format_double(double v);

}  // namespace tcm
