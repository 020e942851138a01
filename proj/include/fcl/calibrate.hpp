#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fcl/encoders.hpp"
#include "fcl/numerics.hpp"

namespace fcl {

struct CalibConfig {
  double lambda_cal = 1.0;
  double lambda_align = 1.0;
  std::size_t steps = 2;
  double learning_rate = 0.002;
  /// Recompute pair weights at every iterate instead of freezing them at δ0.
  bool recompute_weights = false;

  void validate() const;
};

struct CandidatePair {
  std::size_t first = 0;   ///< class id
  std::size_t second = 0;  ///< class id
  EmbeddingVector common;  ///< z̃^com for the pair
  double weight = 1.0;
};

struct PairSet {
  std::vector<CandidatePair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

/// Number of unordered pairs of k classes.
constexpr std::size_t pair_count(std::size_t k) { return k < 2 ? 0 : k * (k - 1) / 2; }

/// Two-class softmax of (beta<z, tau_i>, beta<z, tau_j>).
ProbDist pairwise_posterior(const EmbeddingVector& z, const EmbeddingVector& tau_i,
                            const EmbeddingVector& tau_j, double beta);

/// Same, encoding the two classes under `ctx`. Throws InvalidArgument if i == j.
ProbDist pairwise_posterior(const EmbeddingVector& z, std::size_t class_i, std::size_t class_j,
                            const TextEncoder& enc, const ContextParams& ctx, double beta);

/// 1 - |p_i - p_j|.
double pair_weight(double p_i, double p_j);

/// (1/|P|) Σ w_p JS(π_p ‖ U); 0 for an empty set.
double calibration_loss(std::span<const double> weights, std::span<const ProbDist> pairwise);

/// 1 - mean(cosines).
double alignment_loss(std::span<const double> cosines);

struct LossValues {
  double cal = 0.0;
  double align = 0.0;
  double total = 0.0;
};

/// L_total(δ) = λ_cal L_cal + λ_align L_align over a fixed candidate set.
class CalibrationObjective {
public:
  /// `candidates` are the class ids of C_K (in order); `full_image` is the
  /// view-0 embedding used for pair weights; `base` is δ0.
  CalibrationObjective(const TextEncoder& enc, std::vector<std::size_t> candidates,
                       PairSet pairs, ContextParams base, EmbeddingVector full_image,
                       double beta, CalibConfig cfg);

  LossValues evaluate(const ContextParams& delta) const;
  /// Loss and dL_total/dδ over the learnable tokens.
  LossValues evaluate(const ContextParams& delta, Matrix& gradient) const;

  /// Pair weights at `delta` from the full-image posterior over C_K.
  std::vector<double> weights_at(const ContextParams& delta) const;

  const PairSet& pairs() const noexcept { return pairs_; }
  const ContextParams& base() const noexcept { return base_; }
  const std::vector<std::size_t>& candidates() const noexcept { return candidates_; }
  const CalibConfig& config() const noexcept { return cfg_; }
  const EmbeddingVector& full_image() const noexcept { return full_image_; }
  const TextEncoder& encoder() const noexcept { return *enc_; }
  double beta() const noexcept { return beta_; }

private:
  std::size_t position(std::size_t class_id) const;
  LossValues compute(const ContextParams& delta, Matrix* gradient) const;

  const TextEncoder* enc_;
  std::vector<std::size_t> candidates_;
  PairSet pairs_;
  ContextParams base_;
  EmbeddingVector full_image_;
  double beta_;
  CalibConfig cfg_;
  std::vector<EmbeddingVector> base_text_;
};

struct CalibTrace {
  std::vector<LossValues> losses;      ///< steps + 1 entries, first at δ0
  std::vector<double> base_pairwise;   ///< π_ij^(0)(first) on the full image at δ0, per pair
  ContextParams initial;
  ContextParams final;
  bool skipped = false;                ///< fewer than two candidates
  bool fell_back = false;              ///< non-finite loss or gradient; final = initial
};

struct CalibResult {
  ContextParams delta;
  CalibTrace trace;
};

/// Runs cfg.steps AdamW updates from δ0, evaluating the loss at every iterate.
CalibResult calibrate_context(const CalibrationObjective& objective);

}  // namespace fcl
