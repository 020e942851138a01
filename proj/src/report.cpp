#include "fcl/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fcl/error.hpp"

namespace fcl {

using nlohmann::json;

namespace {

json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json real(const std::optional<double>& v) { return v ? real(*v) : json(nullptr); }

json reals(std::span<const double> v) {
  json out = json::array();
  for (double x : v) out.push_back(real(x));
  return out;
}

json candidates_json(const CandidateSet& c, const ClassVocabulary& vocab) {
  json names = json::array();
  for (std::size_t id : c.class_ids) names.push_back(vocab.names.at(id));
  return {{"class_ids", c.class_ids},
          {"classes", names},
          {"vote_fractions", reals(c.vote_fractions)},
          {"mean_probs", reals(c.mean_probs)},
          {"retained_views", c.retained_views}};
}

json trace_json(const CalibTrace& t) {
  json losses = json::array();
  for (const LossValues& l : t.losses) {
    losses.push_back({{"cal", real(l.cal)}, {"align", real(l.align)}, {"total", real(l.total)}});
  }
  return {{"losses", losses},
          {"base_pairwise", reals(t.base_pairwise)},
          {"skipped", t.skipped},
          {"fell_back", t.fell_back}};
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_real(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json episode_to_json(const EpisodeReport& r, const ClassVocabulary& vocab) {
  json ensemble = json::array();
  for (const TemplateOutcome& t : r.ensemble) {
    ensemble.push_back({{"prediction", t.prediction}, {"vote_fraction", real(t.vote_fraction)}});
  }
  json out{{"image_id", r.image_id},
           {"label", r.label ? json(*r.label) : json(nullptr)},
           {"prediction", r.prediction},
           {"prediction_name", vocab.names.at(r.prediction)},
           {"zero_shot", r.zero_shot},
           {"zero_shot_name", vocab.names.at(r.zero_shot)},
           {"correct", r.label ? json(r.correct()) : json(nullptr)},
           {"candidates", candidates_json(r.candidates, vocab)},
           {"final_ranking", candidates_json(r.final_ranking, vocab)},
           {"calibration", trace_json(r.calibration)},
           {"metric_reference", r.metric_reference},
           {"ecec", real(r.ecec)},
           {"euec", real(r.euec)},
           {"view_entropies", reals(r.view_entropies)},
           {"full_image_entropy", real(r.full_image_entropy)},
           {"ensemble", ensemble},
           {"degraded", r.degraded},
           {"error", r.error}};
  if (r.wall_seconds) out["wall_seconds"] = real(*r.wall_seconds);
  return out;
}

json outcome_to_json(const PredictionOutcome& o) {
  return {{"episodes", o.episodes},
          {"labelled", o.labelled},
          {"skipped", o.skipped},
          {"degraded", o.degraded},
          {"accuracy", real(o.accuracy)},
          {"zero_shot_accuracy", real(o.zero_shot_accuracy)},
          {"mean_ecec_correct", real(o.mean_ecec_correct)},
          {"mean_ecec_incorrect", real(o.mean_ecec_incorrect)},
          {"ecec_rank_test_p", real(o.ecec_rank_test_p)},
          {"euec_entropy_pearson", real(o.euec_entropy_pearson)},
          {"euec_entropy_spearman", real(o.euec_entropy_spearman)}};
}

namespace {

std::vector<std::size_t> by_image_id(const EvaluationResult& result) {
  std::vector<std::size_t> order(result.episodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.episodes[a].image_id < result.episodes[b].image_id;
  });
  return order;
}

}  // namespace

json evaluation_report(const json& header, const EvaluationResult& result,
                       const ClassVocabulary& vocab) {
  json episodes = json::array();
  for (std::size_t i : by_image_id(result)) episodes.push_back(episode_to_json(result.episodes[i], vocab));
  std::vector<std::string> skipped = result.skipped_ids;
  std::sort(skipped.begin(), skipped.end());
  return {{"header", header},
          {"episodes", episodes},
          {"skipped", skipped},
          {"aggregate", outcome_to_json(result.outcome)}};
}

std::string evaluation_csv(const EvaluationResult& result, const ClassVocabulary& vocab) {
  std::string out = "image_id,zero_shot,fcl,correct,ecec,euec\n";
  for (std::size_t i : by_image_id(result)) {
    const EpisodeReport& r = result.episodes[i];
    out += csv_cell(r.image_id) + "," + csv_cell(vocab.names.at(r.zero_shot)) + "," +
           csv_cell(vocab.names.at(r.prediction)) + ",";
    if (r.label) out += r.correct() ? "1" : "0";
    out += "," + (r.ecec ? format_real(*r.ecec) : std::string()) + "," +
           (r.euec ? format_real(*r.euec) : std::string()) + "\n";
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace fcl
