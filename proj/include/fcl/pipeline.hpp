#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fcl/augment.hpp"
#include "fcl/calibrate.hpp"
#include "fcl/encoders.hpp"
#include "fcl/evidence.hpp"
#include "fcl/explore.hpp"

namespace fcl {

struct EpisodeConfig {
  AugmentConfig augment;
  ExploreConfig explore;
  EvidenceConfig evidence;
  CalibConfig calibrate;
  EncoderConfig encoder;
  double ecec_epsilon = 1e-6;
  PromptMode prompt_mode = PromptMode::context;
  /// CL: the initial learnable tokens. CL-HP: the fixed hard prompt.
  std::string context_init = "a photo of a";
  std::size_t context_tokens = 4;
  /// CL-HP only: learnable prefix length.
  std::size_t prefix_tokens = 4;
  /// Prompt ensemble: one base context per template. Empty = context_init only.
  std::vector<std::string> templates;
  /// Adds per-episode wall time to reports (makes them run-dependent).
  bool record_timing = false;

  void validate() const;
};

struct ModelBundle {
  std::shared_ptr<const VisualEncoder> visual;
  std::shared_ptr<const TextEncoder> text;
  ClassVocabulary vocab;

  std::size_t classes() const { return vocab.size(); }
};

/// Base contexts δ0, one per template (or one for context_init).
std::vector<ContextParams> base_contexts(const EpisodeConfig& cfg, std::size_t token_dim,
                                         std::uint64_t seed);

/// Evidence computed on the full image for one candidate set.
struct EvidenceBundle {
  std::vector<std::size_t> candidates;
  std::vector<SpatialProbMap> spatial;            ///< per candidate, in candidate order
  std::vector<EvidenceMap> maps;                  ///< E_c per candidate
  std::vector<CommonEvidenceMap> common;          ///< per unordered pair (a < b positions)
  std::vector<EmbeddingVector> common_embeddings; ///< aligned with `common`

  /// Index into `common` for candidate positions a != b.
  std::size_t pair_index(std::size_t a, std::size_t b) const;
  std::size_t position(std::size_t class_id) const;
};

/// Masks, Δℓ, E_c, S_c, Q_ij and z̃^com for every pair of `candidates`.
EvidenceBundle compute_evidence(const VisualEncoder& visual, const ImageTensor& raw,
                                const Matrix& candidate_text, std::vector<std::size_t> candidates,
                                double beta, const EvidenceConfig& cfg, const RngStream& rng,
                                kernels::Exec exec = kernels::default_exec());

/// Σ_y max(0, <z̃^com_ŷy, τ_ŷ - τ_y>) / Σ_y max(eps, <z, τ_ŷ - τ_y>) over the
/// competitors y; `common[y]` and `tau[y]` are aligned with `competitors`.
double compute_ecec(const EmbeddingVector& z, const EmbeddingVector& tau_pred,
                    std::span<const EmbeddingVector> tau_competitors,
                    std::span<const EmbeddingVector> common, double epsilon);

/// Mean of <z̃^uniq_ŷy, τ_ŷ> over the competitors.
double compute_euec(std::span<const EmbeddingVector> unique, const EmbeddingVector& tau_pred);

struct TemplateOutcome {
  std::size_t prediction = 0;
  double vote_fraction = 0.0;
};

struct EpisodeReport {
  std::string image_id;
  std::optional<std::size_t> label;
  std::size_t prediction = 0;
  std::size_t zero_shot = 0;
  CandidateSet candidates;          ///< C_K at δ0 over the vocabulary
  CandidateSet final_ranking;       ///< Φ over C_K at δ*
  CalibTrace calibration;
  std::size_t metric_reference = 0; ///< ŷ used for ECEC / EUEC
  std::optional<double> ecec;
  std::optional<double> euec;
  Vector view_entropies;            ///< over the vocabulary at δ0
  double full_image_entropy = 0.0;  ///< view 0 over C_K at δ0
  std::vector<TemplateOutcome> ensemble;
  bool degraded = false;
  std::string error;
  std::optional<double> wall_seconds;

  bool correct() const { return label && *label == prediction; }
  bool zero_shot_correct() const { return label && *label == zero_shot; }
};

/// One FCL episode on a raw image with a given base context.
EpisodeReport run_episode(const ImageTensor& image, std::optional<std::size_t> label,
                          const EpisodeConfig& cfg, const ModelBundle& models,
                          const ContextParams& base, const RngStream& rng);

/// Runs one episode per template (same views and masks) and takes a
/// majority vote of the per-template predictions; ties go to the larger
/// summed vote fraction, then the lower class id.
EpisodeReport prompt_ensemble_predict(const ImageTensor& image, std::optional<std::size_t> label,
                                      const EpisodeConfig& cfg, const ModelBundle& models,
                                      std::span<const ContextParams> bases, const RngStream& rng);

/// Majority vote with the tie rule above.
std::size_t ensemble_vote(std::span<const TemplateOutcome> outcomes);

struct PredictionOutcome {
  std::size_t episodes = 0;
  std::size_t labelled = 0;
  std::size_t skipped = 0;
  std::size_t degraded = 0;
  double accuracy = 0.0;
  double zero_shot_accuracy = 0.0;
  std::optional<double> mean_ecec_correct;    ///< split by zero-shot correctness
  std::optional<double> mean_ecec_incorrect;
  std::optional<double> ecec_rank_test_p;
  std::optional<double> euec_entropy_pearson;
  std::optional<double> euec_entropy_spearman;
};

struct DatasetItem {
  std::string image_id;
  std::optional<std::size_t> label;
};

/// Lazy image source; `load` returns nullopt for unreadable images.
struct EpisodeSource {
  std::vector<DatasetItem> items;
  std::function<std::optional<ImageTensor>(std::size_t)> load;
};

struct EvaluationResult {
  std::vector<EpisodeReport> episodes;  ///< in item order, skipped images omitted
  std::vector<std::string> skipped_ids;
  PredictionOutcome outcome;
};

/// Runs every item; episode i uses RngStream::derive(seed, i, "episode").
/// `parallel` > 1 runs that many episodes concurrently; results do not
/// depend on it.
EvaluationResult evaluate_dataset(const EpisodeSource& source, const EpisodeConfig& cfg,
                                  const ModelBundle& models, std::uint64_t seed,
                                  int parallel = 1);

/// Same, with explicit base contexts (one per template).
EvaluationResult evaluate_dataset(const EpisodeSource& source, const EpisodeConfig& cfg,
                                  const ModelBundle& models, std::span<const ContextParams> bases,
                                  std::uint64_t seed, int parallel = 1);

PredictionOutcome summarize(std::span<const EpisodeReport> episodes, std::size_t skipped);

}  // namespace fcl
