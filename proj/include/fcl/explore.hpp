#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcl/encoders.hpp"
#include "fcl/kernels.hpp"
#include "fcl/numerics.hpp"

namespace fcl {

enum class Aggregation {
  voting,  ///< one argmax vote per retained view
  mean,    ///< mean restricted posterior over retained views
};

struct ExploreConfig {
  double rho = 0.3;
  std::size_t top_k = 10;
  Aggregation aggregation = Aggregation::voting;

  void validate() const;
};

/// scores(i, c) = beta * <z_i, tau_{class_ids[c]}>; column c belongs to class_ids[c].
struct ScoreMatrix {
  Matrix scores;
  std::vector<std::size_t> class_ids;

  std::size_t views() const noexcept { return scores.rows(); }
  std::size_t classes() const noexcept { return scores.cols(); }
};

/// Scores every view embedding (rows of `views`) against `text` (one row per
/// entry of `class_ids`).
ScoreMatrix score_views(const Matrix& views, const Matrix& text,
                        std::vector<std::size_t> class_ids, double beta,
                        kernels::Exec exec = kernels::default_exec());

/// Convenience overload that encodes the classes under `ctx` first.
ScoreMatrix score_views(const Matrix& views, const TextEncoder& text_encoder,
                        std::vector<std::size_t> class_ids, const ContextParams& ctx,
                        double beta, kernels::Exec exec = kernels::default_exec());

/// Softmax over the columns of one score row. Throws InvalidArgument if empty.
ProbDist restricted_posterior(std::span<const double> scores_row);

Vector view_entropies(const ScoreMatrix& sm);

/// Retention count max(1, floor(rho * n)).
std::size_t retained_count(std::size_t n, double rho);

/// The max(1, floor(rho*N)) lowest-entropy views, ordered by entropy with
/// ties going to the lower view index.
std::vector<std::size_t> filter_low_entropy(const ScoreMatrix& sm, double rho);

/// Lowest column index among the row maxima.
std::size_t row_argmax(std::span<const double> row);

struct VoteResult {
  Vector fractions;   ///< per column; vote fractions, or mean posteriors in mean mode
  Vector mean_probs;  ///< per column mean restricted posterior over retained views
};

VoteResult vote(const ScoreMatrix& sm, std::span<const std::size_t> retained,
                Aggregation aggregation = Aggregation::voting);

struct CandidateSet {
  std::vector<std::size_t> class_ids;  ///< best first
  Vector vote_fractions;               ///< non-increasing
  Vector mean_probs;
  std::vector<std::size_t> retained_views;

  std::size_t size() const noexcept { return class_ids.size(); }
  std::size_t top() const { return class_ids.front(); }
  bool contains(std::size_t class_id) const;
};

/// Φ_K: filter, aggregate, and keep the top min(K, |C|) classes ordered by
/// fraction, then mean retained probability, then lower class id.
CandidateSet explore_topk(const ScoreMatrix& sm, const ExploreConfig& cfg);

/// Φ_1: the winner of explore_topk with K = 1.
std::size_t explore_top1(const ScoreMatrix& sm, const ExploreConfig& cfg);

}  // namespace fcl
