#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fcl/calibrate.hpp"
#include "fcl/encoders.hpp"
#include "fcl/explore.hpp"
#include "fcl/numerics.hpp"
#include "fcl/pipeline.hpp"

namespace fcl::theory {

/// s_i - max_{j != i} s_j. Throws InvalidArgument for fewer than two classes.
double margin(std::span<const double> scores, std::size_t i);

/// 1 / (1 + (C - 1) e^{-m}).
double softmax_lower_bound(double m, std::size_t classes);

/// Orthonormal rows from Gram–Schmidt on seeded normal draws (count <= dim).
Matrix orthonormal_rows(std::size_t count, std::size_t dim, RngStream rng);

// ---------------------------------------------------------------------------
// Additive-evidence worlds

struct WorldSpec {
  std::size_t dim = 32;
  std::size_t classes = 4;
  std::size_t token_dim = 8;
  std::size_t context_tokens = 4;
  double beta = 20.0;
  Vector common_alignment;  ///< <z_com, tau_c>, one per class
  Vector self_alignment;    ///< <u_c, tau_c>, one per class
  /// Entries of each class Jacobian d tau_c / d δ are N(0, (sensitivity²) / P).
  double context_sensitivity = 1.0;
  /// Adds gain * (mean_a - a_c) * z_com g^T to class c's Jacobian, with one
  /// shared g ~ N(0, 1/P): moving δ along g pulls every common alignment
  /// toward the class mean.
  double fairness_gain = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Planted components z_com, u_0..u_{C-1} and text filler directions, all
/// mutually orthonormal; tau_c(0) = a_c z_com + b_c u_c + r_c f_c exactly.
class SyntheticWorld {
public:
  explicit SyntheticWorld(const WorldSpec& spec);

  const WorldSpec& spec() const noexcept { return spec_; }
  std::size_t dim() const noexcept { return spec_.dim; }
  std::size_t classes() const noexcept { return spec_.classes; }
  std::span<const double> common() const { return basis_.row(0); }
  std::span<const double> unique(std::size_t c) const { return basis_.row(1 + c); }
  /// Unit directions orthogonal to every planted component and filler.
  std::span<const double> spare(std::size_t i) const;
  std::size_t spare_count() const noexcept;

  const AffineTextEncoder& text() const noexcept { return *text_; }
  std::shared_ptr<const AffineTextEncoder> text_ptr() const noexcept { return text_; }
  ContextParams base_context() const;
  /// tau_c at δ.
  EmbeddingVector tau(std::size_t c, const ContextParams& delta) const;

private:
  WorldSpec spec_;
  Matrix basis_;  ///< rows: z_com, u_c..., f_c..., spare...
  std::shared_ptr<const AffineTextEncoder> text_;
};

struct SyntheticView {
  double a_common = 0.0;
  Vector a_unique;  ///< one per class
  Vector noise;     ///< epsilon_k, length dim

  /// a_com z_com + Σ a_l u_l + noise, before normalization.
  Vector combined(const SyntheticWorld& world) const;
  EmbeddingVector embedding(const SyntheticWorld& world) const;
};

struct CompetitorTerms {
  std::size_t competitor = 0;
  double common_bias = 0.0;        ///< a_com <z_com, tau_j - tau_y>
  double competitor_unique = 0.0;  ///< a_j <u_j, tau_j>
  double residual = 0.0;           ///< cross-unique alignments and noise
};

struct MarginBreakdown {
  double unique_term = 0.0;  ///< a_y <u_y, tau_y>
  std::vector<CompetitorTerms> competitors;
  std::size_t argmax_competitor = 0;
  /// beta * (unique - max_j (common_bias + competitor_unique + residual)).
  double recombined = 0.0;
  /// beta * (<v, tau_y> - max_j <v, tau_j>) on the unnormalized view v.
  double direct = 0.0;
  /// Margin of the normalized embedding, for comparison.
  double normalized = 0.0;
};

MarginBreakdown margin_breakdown(const SyntheticView& view, const SyntheticWorld& world,
                                 const ContextParams& delta, std::size_t y);

struct ScoreTerms {
  double common = 0.0;
  double own_unique = 0.0;
  double cross_unique = 0.0;
  double noise = 0.0;
  double total = 0.0;  ///< beta * sum of the four terms
  double direct = 0.0; ///< beta * <v, tau_i>
};

/// Four-term split of the unnormalized score of class i.
ScoreTerms score_decomposition(const SyntheticView& view, const SyntheticWorld& world,
                               const ContextParams& delta, std::size_t i);

// ---------------------------------------------------------------------------
// Failure-mode experiments

struct FailureSpec {
  std::size_t trials = 100;
  std::size_t views = 64;
  double biased_fraction = 0.7;
  double biased_angle_min = 0.0;  ///< degrees, mixing between z_com and u_y
  double biased_angle_max = 15.0;
  double unbiased_angle_min = 28.0;
  double unbiased_angle_max = 36.0;
  double full_image_angle_min = 20.0;
  double full_image_angle_max = 24.0;
  double noise = 0.02;
  double rho = 0.3;
  std::size_t entropy_steps = 5;
  CalibConfig calibrate;
  WorldSpec world;  ///< seed is replaced per trial
  std::uint64_t seed = 7;

  static FailureSpec biased();
  static FailureSpec unbiased();
};

struct FailureTrial {
  double wrong_prob_before = 0.0;  ///< π(j | view 0, δ0)
  double wrong_prob_after = 0.0;   ///< after entropy minimization
  std::size_t vote_prediction = 0;
  std::size_t fcl_prediction = 0;
  std::size_t oracle_prediction = 0;
  double cal_before = 0.0;
  double cal_after = 0.0;
  double gap_before = 0.0;  ///< |<z_com, tau_j - tau_y>| at δ0
  double gap_after = 0.0;   ///< same at δ*
};

struct FailureReport {
  std::size_t true_class = 0;
  std::size_t wrong_class = 1;
  std::vector<FailureTrial> trials;

  std::size_t amplified() const;      ///< trials with wrong_prob_after > wrong_prob_before
  std::size_t vote_wrong() const;     ///< trials where voting picks the wrong class
  std::size_t vote_correct() const;
  std::size_t fcl_flipped() const;    ///< vote wrong, FCL correct
  std::size_t fcl_correct() const;
  std::size_t oracle_flipped() const; ///< vote wrong, planted optimum correct
  std::size_t cal_decreased() const;
  std::size_t gap_decreased() const;
};

FailureReport run_failure_mode_experiments(const FailureSpec& spec);

/// Per-view score matrix of a trial's views at δ over all classes.
ScoreMatrix synthetic_scores(const SyntheticWorld& world, std::span<const EmbeddingVector> views,
                             const ContextParams& delta);

/// Mean view entropy over `retained` and its gradient in δ.
double mean_entropy(const SyntheticWorld& world, std::span<const EmbeddingVector> views,
                    std::span<const std::size_t> retained, const ContextParams& delta,
                    Matrix* gradient);

// ---------------------------------------------------------------------------
// EUEC / entropy correlation

enum class CorrelationMode {
  swept,  ///< unique coefficient swept 0..1, alignment tied to it
  null,   ///< alignment uses an independent coefficient draw
};

struct CorrelationSpec {
  std::size_t views = 200;
  CorrelationMode mode = CorrelationMode::swept;
  double common_coefficient = 0.8;
  double noise = 0.05;
  WorldSpec world;
  std::uint64_t seed = 11;
};

struct CorrelationResult {
  Vector entropies;
  Vector euec;
  std::optional<double> pearson;
  std::optional<double> spearman;
  bool degenerate() const { return !pearson || !spearman; }
};

CorrelationResult euec_entropy_correlation(const CorrelationSpec& spec);

// ---------------------------------------------------------------------------
// Image-level toy world

struct ToyImageSpec {
  std::size_t size = 28;  ///< pixels; split into a 4×4 block layout
  WorldSpec world;
  double texture_amplitude = 0.4;
  double clutter = 0.02;     ///< scale of the unstructured encoder weights
  double bias = 0.005;       ///< encoder bias, along a spare direction
  double pixel_noise = 0.02;
  std::uint64_t seed = 3;
};

/// Images whose centre 2×2 blocks carry a texture the encoder maps to z_com
/// and whose 12 border blocks carry a class texture mapped to u_c.
class ToyImageWorld {
public:
  explicit ToyImageWorld(const ToyImageSpec& spec);

  const SyntheticWorld& world() const noexcept { return world_; }
  const ToyImageSpec& spec() const noexcept { return spec_; }
  std::shared_ptr<const ToyVisualEncoder> visual() const noexcept { return visual_; }
  ModelBundle bundle() const;

  /// Image with common strength a_com and class-y unique strength a_unique.
  ImageTensor render(std::size_t y, double a_common, double a_unique, RngStream rng) const;

  bool in_common_region(std::size_t row, std::size_t col) const;

private:
  ToyImageSpec spec_;
  SyntheticWorld world_;
  std::vector<Vector> textures_;  ///< [0] common, [1 + c] class c; block×block×3
  std::shared_ptr<const ToyVisualEncoder> visual_;
};

struct ProxyResult {
  std::size_t instances = 0;
  std::size_t holds = 0;
  Vector cos_sum;
  Vector cos_best_component;
};

struct ProxySpec {
  std::size_t instances = 200;
  double common_min = 0.4;
  double common_max = 0.8;
  double unique_min = 0.5;
  double unique_max = 1.0;
  EvidenceConfig evidence;
  std::uint64_t seed = 1;
};

/// cos(z, z̃com + 0.1 z̃uniq1 + 0.1 z̃uniq2) versus each component's cosine,
/// where uniq1/uniq2 are the unique embeddings of the top-1 class against
/// the top-2 class and vice versa.
ProxyResult proxy_reconstruction(const ToyImageWorld& world, const ProxySpec& spec);

struct TrendSpec {
  std::size_t episodes = 200;
  std::size_t views = 16;
  std::size_t masks = 64;
  double common_min = 0.6;
  double common_max = 1.0;
  double unique_min = 0.05;
  double unique_max = 0.9;
  std::uint64_t seed = 5;
};

/// Runs the full pipeline on toy-image episodes and summarizes ECEC by
/// zero-shot correctness.
EvaluationResult ecec_trend(const ToyImageWorld& world, const TrendSpec& spec);

/// Default image world used by the trend, proxy and pipeline checks.
ToyImageSpec default_image_spec();

}  // namespace fcl::theory
