#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "fcl/encoders.hpp"
#include "fcl/pipeline.hpp"
#include "json.hpp"

namespace fcl {

nlohmann::json episode_to_json(const EpisodeReport& report, const ClassVocabulary& vocab);
nlohmann::json outcome_to_json(const PredictionOutcome& outcome);

/// {header, episodes, skipped, aggregate}. Episodes are sorted by image id,
/// so the document does not depend on evaluation order.
nlohmann::json evaluation_report(const nlohmann::json& header, const EvaluationResult& result,
                                 const ClassVocabulary& vocab);

/// image_id,zero_shot,fcl,correct,ecec,euec with class names; empty cells
/// for missing values.
std::string evaluation_csv(const EvaluationResult& result, const ClassVocabulary& vocab);

/// Writes `text` through a temporary file and rename, so readers never see
/// a partial report.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Shortest round-trip decimal form, used for every real in reports.
std::string format_real(double v);

}  // namespace fcl
