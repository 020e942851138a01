#pragma once

#include <string>
#include <vector>

#include "fcl/config.hpp"
#include "fcl/dataset.hpp"
#include "fcl/pipeline.hpp"
#include "json.hpp"

namespace fcl {

struct LoadedModels {
  ModelBundle models;
  std::vector<ContextParams> bases;  ///< δ0, one per template
};

/// Toy backend: a seeded random visual map at augment.output_size and the
/// toy text encoder over the class-name file. Graph backend: the verified
/// export named by graph.manifest.
LoadedModels load_models(const RunConfig& cfg);

/// Config echo for report headers. Leaves out `parallel` and `output`,
/// which do not affect results.
nlohmann::json report_header(const RunConfig& cfg);

struct EvaluationOutput {
  EvaluationResult result;
  std::string json;  ///< full report, 2-space indented, trailing newline
  std::string csv;
};

/// Scans cfg.dataset, evaluates it and renders the report. Decode failures
/// go to `warn` and are counted as skipped.
EvaluationOutput run_evaluation(const RunConfig& cfg, const LoadedModels& loaded, WarningSink warn);

}  // namespace fcl
