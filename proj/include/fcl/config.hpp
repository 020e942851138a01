#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fcl/dataset.hpp"
#include "fcl/pipeline.hpp"
#include "json.hpp"

namespace fcl {

struct ToyBackendConfig {
  std::size_t token_dim = 16;
  std::size_t class_dim = 16;
  double bias_scale = 0.1;
};

/// Everything a CLI run needs. Paths are stored as resolved against the
/// directory of the config file they came from.
struct RunConfig {
  EpisodeConfig episode;
  std::uint64_t seed = 0;
  ToyBackendConfig toy;
  std::filesystem::path graph_manifest;  ///< backend = graph
  std::filesystem::path classes;         ///< class-name file (toy backend vocabulary)
  std::optional<DatasetManifest> dataset;
  std::filesystem::path output = "fcl-out";
  int parallel = 1;

  /// Sub-config validation plus cross-field checks; throws ConfigError.
  void validate() const;
};

/// Parses a config document. Every field is optional; unknown keys are
/// rejected with their `$.`-path. Relative paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of a config; parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Command-line overrides, applied after the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<BackendKind> backend;
  std::optional<std::size_t> views;
  std::optional<double> rho;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> masks;
  std::optional<std::size_t> steps;
  std::optional<std::filesystem::path> output;
  std::optional<int> parallel;
  std::optional<PromptMode> prompt_mode;
  std::optional<std::filesystem::path> templates;  ///< one template per line
};

void apply_overrides(RunConfig& cfg, const ConfigOverrides& overrides);

std::string to_string(BackendKind kind);
std::string to_string(PromptMode mode);
std::string to_string(Aggregation aggregation);
BackendKind parse_backend(const std::string& s);
PromptMode parse_prompt_mode(const std::string& s);

}  // namespace fcl
