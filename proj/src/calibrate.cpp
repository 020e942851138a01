#include "fcl/calibrate.hpp"

#include <algorithm>
#include <cmath>

#include "fcl/error.hpp"

namespace fcl {

void CalibConfig::validate() const {
  if (!(lambda_cal >= 0.0) || !std::isfinite(lambda_cal)) {
    throw ConfigError("$.calibrate.lambda_cal", "must be a finite value >= 0");
  }
  if (!(lambda_align >= 0.0) || !std::isfinite(lambda_align)) {
    throw ConfigError("$.calibrate.lambda_align", "must be a finite value >= 0");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("$.calibrate.learning_rate", "must be > 0");
  }
}

ProbDist pairwise_posterior(const EmbeddingVector& z, const EmbeddingVector& tau_i,
                            const EmbeddingVector& tau_j, double beta) {
  const double s[2] = {similarity(z, tau_i, beta), similarity(z, tau_j, beta)};
  return softmax(s);
}

ProbDist pairwise_posterior(const EmbeddingVector& z, std::size_t class_i, std::size_t class_j,
                            const TextEncoder& enc, const ContextParams& ctx, double beta) {
  if (class_i == class_j) throw InvalidArgument("pairwise_posterior: classes must differ");
  return pairwise_posterior(z, enc.encode(class_i, ctx), enc.encode(class_j, ctx), beta);
}

double pair_weight(double p_i, double p_j) {
  return std::clamp(1.0 - std::abs(p_i - p_j), 0.0, 1.0);
}

double calibration_loss(std::span<const double> weights, std::span<const ProbDist> pairwise) {
  if (weights.size() != pairwise.size()) throw ShapeMismatch("calibration_loss: one weight per pair");
  if (pairwise.empty()) return 0.0;
  const ProbDist u = ProbDist::uniform(2);
  double total = 0.0;
  for (std::size_t p = 0; p < pairwise.size(); ++p) total += weights[p] * js_divergence(pairwise[p], u);
  return total / static_cast<double>(pairwise.size());
}

double alignment_loss(std::span<const double> cosines) {
  if (cosines.empty()) return 0.0;
  return 1.0 - mean(cosines);
}

// ---------------------------------------------------------------------------

CalibrationObjective::CalibrationObjective(const TextEncoder& enc,
                                           std::vector<std::size_t> candidates, PairSet pairs,
                                           ContextParams base, EmbeddingVector full_image,
                                           double beta, CalibConfig cfg)
    : enc_(&enc),
      candidates_(std::move(candidates)),
      pairs_(std::move(pairs)),
      base_(std::move(base)),
      full_image_(std::move(full_image)),
      beta_(beta),
      cfg_(cfg) {
  cfg_.validate();
  if (candidates_.empty()) throw InvalidArgument("CalibrationObjective: empty candidate set");
  for (const CandidatePair& p : pairs_.pairs) {
    if (p.first == p.second) throw InvalidArgument("CalibrationObjective: degenerate pair");
    position(p.first);
    position(p.second);
    if (!(p.weight >= 0.0 && p.weight <= 1.0)) {
      throw InvalidArgument("CalibrationObjective: pair weight outside [0, 1]");
    }
  }
  base_text_ = encode_classes(*enc_, candidates_, base_);
}

std::size_t CalibrationObjective::position(std::size_t class_id) const {
  const auto it = std::find(candidates_.begin(), candidates_.end(), class_id);
  if (it == candidates_.end()) {
    throw InvalidArgument("class " + std::to_string(class_id) + " is not a candidate");
  }
  return static_cast<std::size_t>(it - candidates_.begin());
}

std::vector<double> CalibrationObjective::weights_at(const ContextParams& delta) const {
  Vector scores(candidates_.size());
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    scores[c] = similarity(full_image_, enc_->encode(candidates_[c], delta), beta_);
  }
  const ProbDist post = softmax(scores);
  std::vector<double> w;
  w.reserve(pairs_.size());
  for (const CandidatePair& p : pairs_.pairs) {
    w.push_back(pair_weight(post[position(p.first)], post[position(p.second)]));
  }
  return w;
}

LossValues CalibrationObjective::evaluate(const ContextParams& delta) const {
  return compute(delta, nullptr);
}

LossValues CalibrationObjective::evaluate(const ContextParams& delta, Matrix& gradient) const {
  return compute(delta, &gradient);
}

LossValues CalibrationObjective::compute(const ContextParams& delta, Matrix* gradient) const {
  const std::size_t k = candidates_.size();
  const std::vector<EmbeddingVector> tau = encode_classes(*enc_, candidates_, delta);
  std::vector<Vector> upstream(k, Vector(enc_->dim(), 0.0));

  std::vector<double> weights;
  if (cfg_.recompute_weights) {
    weights = weights_at(delta);
  } else {
    for (const CandidatePair& p : pairs_.pairs) weights.push_back(p.weight);
  }

  LossValues out;
  const ProbDist u = ProbDist::uniform(2);
  const double inv_pairs = pairs_.empty() ? 0.0 : 1.0 / static_cast<double>(pairs_.size());
  for (std::size_t n = 0; n < pairs_.size(); ++n) {
    const CandidatePair& pair = pairs_.pairs[n];
    const std::size_t a = position(pair.first);
    const std::size_t b = position(pair.second);
    const ProbDist p = pairwise_posterior(pair.common, tau[a], tau[b], beta_);
    out.cal += weights[n] * js_divergence(p, u) * inv_pairs;
    if (gradient == nullptr) continue;

    // dJS/dp_k = ½ ln(p_k / m_k) with m = (p + U)/2, then through the softmax.
    double g[2];
    for (std::size_t t = 0; t < 2; ++t) {
      g[t] = p[t] > 0.0 ? 0.5 * std::log(p[t] / (0.5 * (p[t] + 0.5))) : 0.0;
    }
    const double mean_g = p[0] * g[0] + p[1] * g[1];
    const double scale = cfg_.lambda_cal * weights[n] * inv_pairs * beta_;
    const double ds[2] = {p[0] * (g[0] - mean_g), p[1] * (g[1] - mean_g)};
    const auto z = pair.common.values();
    for (std::size_t d = 0; d < z.size(); ++d) {
      upstream[a][d] += scale * ds[0] * z[d];
      upstream[b][d] += scale * ds[1] * z[d];
    }
  }

  Vector cosines(k);
  for (std::size_t c = 0; c < k; ++c) cosines[c] = dot(tau[c].values(), base_text_[c].values());
  out.align = alignment_loss(cosines);
  out.total = cfg_.lambda_cal * out.cal + cfg_.lambda_align * out.align;

  if (gradient != nullptr) {
    const double align_scale = -cfg_.lambda_align / static_cast<double>(k);
    for (std::size_t c = 0; c < k; ++c) {
      const auto t0 = base_text_[c].values();
      for (std::size_t d = 0; d < t0.size(); ++d) upstream[c][d] += align_scale * t0[d];
    }
    *gradient = Matrix(delta.learnable().rows(), delta.learnable().cols());
    auto acc = gradient->flat();
    for (std::size_t c = 0; c < k; ++c) {
      const Matrix part = enc_->encode_vjp(candidates_[c], delta, upstream[c]);
      const auto src = part.flat();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CalibResult calibrate_context(const CalibrationObjective& objective) {
  CalibResult r;
  const ContextParams& base = objective.base();
  r.delta = base;
  r.trace.initial = base;
  r.trace.final = base;

  const TextEncoder& enc = objective.encoder();
  for (const CandidatePair& p : objective.pairs().pairs) {
    const ProbDist pi0 = pairwise_posterior(objective.full_image(), p.first, p.second, enc, base,
                                            objective.beta());
    r.trace.base_pairwise.push_back(pi0[0]);
  }
  if (objective.pairs().empty()) {
    r.trace.skipped = true;
    return r;
  }

  const CalibConfig& cfg = objective.config();
  AdamWOptions opts;
  opts.learning_rate = cfg.learning_rate;
  AdamWState state(base.parameter_count(), opts);
  ContextParams delta = base;
  for (std::size_t t = 0; t <= cfg.steps; ++t) {
    Matrix grad;
    const LossValues l = objective.evaluate(delta, grad);
    if (!std::isfinite(l.total) || !all_finite(grad.flat())) {
      r.trace.fell_back = true;
      delta = base;
      break;
    }
    r.trace.losses.push_back(l);
    if (t == cfg.steps) break;
    adamw_step(delta.learnable().flat(), grad.flat(), state);
  }
  r.trace.final = delta;
  r.delta = std::move(delta);
  return r;
}

}  // namespace fcl
