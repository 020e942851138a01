#include "fcl/explore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fcl/error.hpp"

namespace fcl {

void ExploreConfig::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("$.explore.rho", "must lie in (0, 1]");
  if (top_k < 1) throw ConfigError("$.explore.top_k", "must be >= 1");
}

ScoreMatrix score_views(const Matrix& views, const Matrix& text,
                        std::vector<std::size_t> class_ids, double beta, kernels::Exec exec) {
  if (text.rows() != class_ids.size()) throw ShapeMismatch("score_views: one text row per class");
  if (class_ids.empty()) throw InvalidArgument("score_views: empty class set");
  ScoreMatrix sm;
  sm.class_ids = std::move(class_ids);
  kernels::score_matrix(views, text, beta, sm.scores, exec);
  return sm;
}

ScoreMatrix score_views(const Matrix& views, const TextEncoder& text_encoder,
                        std::vector<std::size_t> class_ids, const ContextParams& ctx,
                        double beta, kernels::Exec exec) {
  const Matrix text = stack_rows(encode_classes(text_encoder, class_ids, ctx));
  return score_views(views, text, std::move(class_ids), beta, exec);
}

ProbDist restricted_posterior(std::span<const double> scores_row) {
  if (scores_row.empty()) throw InvalidArgument("restricted_posterior: empty candidate set");
  return softmax(scores_row);
}

namespace {

double row_entropy(std::span<const double> row) {
  const Vector logp = log_softmax(row);
  double h = 0.0;
  for (double lp : logp) {
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return std::max(h, 0.0);
}

}  // namespace

Vector view_entropies(const ScoreMatrix& sm) {
  if (sm.classes() == 0) throw InvalidArgument("view_entropies: empty candidate set");
  Vector h(sm.views());
  for (std::size_t i = 0; i < sm.views(); ++i) h[i] = row_entropy(sm.scores.row(i));
  return h;
}

std::size_t retained_count(std::size_t n, double rho) {
  const auto k = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> filter_low_entropy(const ScoreMatrix& sm, double rho) {
  if (sm.views() == 0) throw InvalidArgument("filter_low_entropy: no views");
  const Vector h = view_entropies(sm);
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return h[a] < h[b]; });
  order.resize(retained_count(h.size(), rho));
  return order;
}

std::size_t row_argmax(std::span<const double> row) {
  if (row.empty()) throw InvalidArgument("row_argmax: empty row");
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

VoteResult vote(const ScoreMatrix& sm, std::span<const std::size_t> retained,
                Aggregation aggregation) {
  if (retained.empty()) throw InvalidArgument("vote: no retained views");
  const std::size_t c_count = sm.classes();
  VoteResult r{Vector(c_count, 0.0), Vector(c_count, 0.0)};
  Vector counts(c_count, 0.0);
  for (std::size_t i : retained) {
    if (i >= sm.views()) throw InvalidArgument("vote: view index out of range");
    const auto row = sm.scores.row(i);
    const ProbDist p = restricted_posterior(row);
    for (std::size_t c = 0; c < c_count; ++c) r.mean_probs[c] += p[c];
    counts[row_argmax(row)] += 1.0;
  }
  const double n = static_cast<double>(retained.size());
  for (std::size_t c = 0; c < c_count; ++c) {
    r.mean_probs[c] /= n;
    r.fractions[c] = aggregation == Aggregation::voting ? counts[c] / n : r.mean_probs[c];
  }
  return r;
}

bool CandidateSet::contains(std::size_t class_id) const {
  return std::find(class_ids.begin(), class_ids.end(), class_id) != class_ids.end();
}

CandidateSet explore_topk(const ScoreMatrix& sm, const ExploreConfig& cfg) {
  cfg.validate();
  if (sm.classes() == 0) throw InvalidArgument("explore_topk: empty class set");
  CandidateSet out;
  out.retained_views = filter_low_entropy(sm, cfg.rho);
  const VoteResult v = vote(sm, out.retained_views, cfg.aggregation);

  std::vector<std::size_t> cols(sm.classes());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
    if (v.fractions[a] != v.fractions[b]) return v.fractions[a] > v.fractions[b];
    if (v.mean_probs[a] != v.mean_probs[b]) return v.mean_probs[a] > v.mean_probs[b];
    return sm.class_ids[a] < sm.class_ids[b];
  });
  cols.resize(std::min(cfg.top_k, cols.size()));
  for (std::size_t c : cols) {
    out.class_ids.push_back(sm.class_ids[c]);
    out.vote_fractions.push_back(v.fractions[c]);
    out.mean_probs.push_back(v.mean_probs[c]);
  }
  return out;
}

std::size_t explore_top1(const ScoreMatrix& sm, const ExploreConfig& cfg) {
  ExploreConfig one = cfg;
  one.top_k = 1;
  return explore_topk(sm, one).top();
}

}  // namespace fcl
