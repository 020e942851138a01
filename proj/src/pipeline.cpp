#include "fcl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <map>
#include <numeric>

#include "fcl/error.hpp"

namespace fcl {

void EpisodeConfig::validate() const {
  augment.validate();
  explore.validate();
  evidence.validate();
  calibrate.validate();
  encoder.validate();
  if (!(ecec_epsilon > 0.0)) throw ConfigError("$.ecec_epsilon", "must be > 0");
  if (context_tokens < 1) throw ConfigError("$.context.tokens", "must be >= 1");
  if (prompt_mode == PromptMode::context && templates.empty()) {
    const std::size_t words = word_token_embeddings(context_init, 1).rows();
    if (words != context_tokens) {
      throw ConfigError("$.context.tokens", "CL mode needs one token per word of context.init (" +
                                                std::to_string(words) + ")");
    }
  }
  if (prompt_mode == PromptMode::hard_prompt_prefix && prefix_tokens < 1) {
    throw ConfigError("$.context.prefix_tokens", "CL-HP mode needs at least one prefix token");
  }
}

std::vector<ContextParams> base_contexts(const EpisodeConfig& cfg, std::size_t token_dim,
                                         std::uint64_t seed) {
  std::vector<ContextParams> out;
  if (cfg.templates.empty()) {
    out.push_back(make_context(cfg.context_init, token_dim, cfg.prompt_mode, cfg.prefix_tokens, seed));
    return out;
  }
  for (const std::string& t : cfg.templates) {
    out.push_back(make_context(t, token_dim, cfg.prompt_mode, cfg.prefix_tokens, seed));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t EvidenceBundle::pair_index(std::size_t a, std::size_t b) const {
  if (a == b) throw InvalidArgument("pair_index: positions must differ");
  if (a > b) std::swap(a, b);
  const std::size_t k = candidates.size();
  if (b >= k) throw InvalidArgument("pair_index: position out of range");
  return a * k - a * (a + 1) / 2 + (b - a - 1);
}

std::size_t EvidenceBundle::position(std::size_t class_id) const {
  const auto it = std::find(candidates.begin(), candidates.end(), class_id);
  if (it == candidates.end()) throw InvalidArgument("class is not a candidate");
  return static_cast<std::size_t>(it - candidates.begin());
}

EvidenceBundle compute_evidence(const VisualEncoder& visual, const ImageTensor& raw,
                                const Matrix& candidate_text, std::vector<std::size_t> candidates,
                                double beta, const EvidenceConfig& cfg, const RngStream& rng,
                                kernels::Exec exec) {
  if (candidate_text.rows() != candidates.size()) {
    throw ShapeMismatch("compute_evidence: one text row per candidate");
  }
  EvidenceBundle ev;
  ev.candidates = std::move(candidates);
  const std::vector<MaskSpec> masks = sample_masks(cfg, raw.height, raw.width, rng);
  const OcclusionProbe probe(visual, raw, candidate_text, beta);
  const Matrix dl = probe.delta_losses(masks, exec);
  const std::vector<std::uint8_t> packed = pack_masks(masks);

  const std::size_t k = ev.candidates.size();
  Vector coeffs(masks.size());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t n = 0; n < masks.size(); ++n) coeffs[n] = dl(n, c);
    ev.maps.push_back(class_evidence_map(packed, coeffs, raw.height, raw.width, exec));
    ev.spatial.push_back(spatial_softmax(ev.maps.back()));
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      ev.common.push_back(
          common_evidence_map(ev.spatial[a], ev.spatial[b], ev.candidates[a], ev.candidates[b]));
      ev.common_embeddings.push_back(common_evidence_embedding(visual, raw, ev.common.back()));
    }
  }
  return ev;
}

double compute_ecec(const EmbeddingVector& z, const EmbeddingVector& tau_pred,
                    std::span<const EmbeddingVector> tau_competitors,
                    std::span<const EmbeddingVector> common, double epsilon) {
  if (tau_competitors.empty()) throw InvalidArgument("compute_ecec: needs at least one competitor");
  if (common.size() != tau_competitors.size()) {
    throw ShapeMismatch("compute_ecec: one common embedding per competitor");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t y = 0; y < tau_competitors.size(); ++y) {
    Vector diff(tau_pred.dim());
    for (std::size_t d = 0; d < diff.size(); ++d) diff[d] = tau_pred[d] - tau_competitors[y][d];
    num += std::max(0.0, dot(common[y].values(), diff));
    den += std::max(epsilon, dot(z.values(), diff));
  }
  return num / den;
}

double compute_euec(std::span<const EmbeddingVector> unique, const EmbeddingVector& tau_pred) {
  if (unique.empty()) throw InvalidArgument("compute_euec: needs at least one competitor");
  double s = 0.0;
  for (const EmbeddingVector& u : unique) s += dot(u.values(), tau_pred.values());
  return s / static_cast<double>(unique.size());
}

// ---------------------------------------------------------------------------

namespace {

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<EmbeddingVector> unstack(const Matrix& m) {
  std::vector<EmbeddingVector> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out.push_back(EmbeddingVector::from_unit(Vector(m.row(r).begin(), m.row(r).end())));
  }
  return out;
}

}  // namespace

EpisodeReport run_episode(const ImageTensor& image, std::optional<std::size_t> label,
                          const EpisodeConfig& cfg, const ModelBundle& models,
                          const ContextParams& base, const RngStream& rng) {
  const auto started = std::chrono::steady_clock::now();
  const kernels::Exec exec = kernels::default_exec();
  const VisualEncoder& visual = *models.visual;
  const TextEncoder& text = *models.text;
  const double beta = cfg.encoder.beta;
  if (visual.input_height() != cfg.augment.output_size ||
      visual.input_width() != cfg.augment.output_size) {
    throw ConfigError("$.augment.output_size", "must match the visual encoder input resolution (" +
                                                   std::to_string(visual.input_height()) + ")");
  }

  EpisodeReport rep;
  rep.label = label;

  const ViewSet views = generate_views(image, cfg.augment, rng.fork("views"), exec);
  const std::vector<EmbeddingVector> z = visual.encode_batch(views.views, exec);
  const Matrix view_matrix = stack_rows(z);

  std::vector<std::size_t> all_classes(text.class_count());
  std::iota(all_classes.begin(), all_classes.end(), std::size_t{0});
  const Matrix text_base = stack_rows(encode_classes(text, all_classes, base));
  const ScoreMatrix full = score_views(view_matrix, text_base, all_classes, beta, exec);
  rep.zero_shot = row_argmax(full.scores.row(0));
  rep.prediction = rep.zero_shot;
  rep.view_entropies = view_entropies(full);

  try {
    rep.candidates = explore_topk(full, cfg.explore);
    const std::vector<std::size_t>& ck = rep.candidates.class_ids;
    const Matrix ck_text = select_rows(text_base, ck);

    Vector ck_scores(ck.size());
    for (std::size_t c = 0; c < ck.size(); ++c) ck_scores[c] = beta * dot(z[0].values(), ck_text.row(c));
    const ProbDist ck_post = softmax(ck_scores);
    rep.full_image_entropy = entropy(ck_post);

    ContextParams delta_star = base;
    if (ck.size() >= 2) {
      const EvidenceBundle ev = compute_evidence(visual, views.views[0], ck_text, ck, beta,
                                                 cfg.evidence, rng.fork("masks"), exec);
      PairSet pairs;
      for (std::size_t a = 0; a < ck.size(); ++a) {
        for (std::size_t b = a + 1; b < ck.size(); ++b) {
          pairs.pairs.push_back({ck[a], ck[b], ev.common_embeddings[ev.pair_index(a, b)],
                                 pair_weight(ck_post[a], ck_post[b])});
        }
      }
      const CalibrationObjective objective(text, ck, std::move(pairs), base, z[0], beta,
                                           cfg.calibrate);
      CalibResult calib = calibrate_context(objective);
      rep.calibration = std::move(calib.trace);
      delta_star = std::move(calib.delta);

      rep.metric_reference = rep.candidates.contains(rep.zero_shot) ? rep.zero_shot : ck.front();
      const std::size_t r = ev.position(rep.metric_reference);
      const std::vector<EmbeddingVector> tau0 = unstack(ck_text);
      std::vector<EmbeddingVector> tau_comp;
      std::vector<EmbeddingVector> common;
      std::vector<EmbeddingVector> unique;
      for (std::size_t y = 0; y < ck.size(); ++y) {
        if (y == r) continue;
        const std::size_t p = ev.pair_index(r, y);
        tau_comp.push_back(tau0[y]);
        common.push_back(ev.common_embeddings[p]);
        unique.push_back(
            unique_evidence_embedding(visual, views.views[0], ev.spatial[r], ev.common[p]));
      }
      rep.ecec = compute_ecec(z[0], tau0[r], tau_comp, common, cfg.ecec_epsilon);
      rep.euec = compute_euec(unique, tau0[r]);
    } else {
      rep.metric_reference = ck.front();
      rep.calibration.initial = base;
      rep.calibration.final = base;
      rep.calibration.skipped = true;
    }

    const ScoreMatrix final_scores = score_views(view_matrix, text, ck, delta_star, beta, exec);
    ExploreConfig rank_all = cfg.explore;
    rank_all.top_k = ck.size();
    rep.final_ranking = explore_topk(final_scores, rank_all);
    rep.prediction = rep.final_ranking.top();
  } catch (const Error& e) {
    rep.degraded = true;
    rep.error = e.what();
    rep.prediction = rep.zero_shot;
  }

  if (cfg.record_timing) {
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return rep;
}

std::size_t ensemble_vote(std::span<const TemplateOutcome> outcomes) {
  if (outcomes.empty()) throw InvalidArgument("ensemble_vote: no templates");
  std::map<std::size_t, std::pair<std::size_t, double>> tally;
  for (const TemplateOutcome& o : outcomes) {
    auto& [count, fraction] = tally[o.prediction];
    ++count;
    fraction += o.vote_fraction;
  }
  auto best = tally.begin();
  for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
    const auto& [count, fraction] = it->second;
    const auto& [best_count, best_fraction] = best->second;
    if (count > best_count || (count == best_count && fraction > best_fraction)) best = it;
  }
  return best->first;
}

EpisodeReport prompt_ensemble_predict(const ImageTensor& image, std::optional<std::size_t> label,
                                      const EpisodeConfig& cfg, const ModelBundle& models,
                                      std::span<const ContextParams> bases, const RngStream& rng) {
  if (bases.empty()) throw InvalidArgument("prompt_ensemble_predict: no templates");
  std::vector<EpisodeReport> reports;
  std::vector<TemplateOutcome> outcomes;
  for (const ContextParams& base : bases) {
    reports.push_back(run_episode(image, label, cfg, models, base, rng));
    const EpisodeReport& r = reports.back();
    const double fraction = r.final_ranking.size() != 0 ? r.final_ranking.vote_fractions.front() : 0.0;
    outcomes.push_back({r.prediction, fraction});
  }
  const std::size_t winner = ensemble_vote(outcomes);
  auto it = std::find_if(reports.begin(), reports.end(),
                         [&](const EpisodeReport& r) { return r.prediction == winner; });
  EpisodeReport out = std::move(*it);
  if (bases.size() > 1) out.ensemble = std::move(outcomes);
  return out;
}

// ---------------------------------------------------------------------------

PredictionOutcome summarize(std::span<const EpisodeReport> episodes, std::size_t skipped) {
  PredictionOutcome o;
  o.episodes = episodes.size();
  o.skipped = skipped;
  std::size_t correct = 0;
  std::size_t zs_correct = 0;
  Vector ecec_ok;
  Vector ecec_bad;
  Vector euec;
  Vector ent;
  for (const EpisodeReport& r : episodes) {
    if (r.degraded) ++o.degraded;
    if (r.label) {
      ++o.labelled;
      correct += r.correct() ? 1 : 0;
      zs_correct += r.zero_shot_correct() ? 1 : 0;
      if (r.ecec) (r.zero_shot_correct() ? ecec_ok : ecec_bad).push_back(*r.ecec);
    }
    if (r.euec) {
      euec.push_back(*r.euec);
      ent.push_back(r.full_image_entropy);
    }
  }
  if (o.labelled > 0) {
    o.accuracy = static_cast<double>(correct) / static_cast<double>(o.labelled);
    o.zero_shot_accuracy = static_cast<double>(zs_correct) / static_cast<double>(o.labelled);
  }
  if (!ecec_ok.empty()) o.mean_ecec_correct = mean(ecec_ok);
  if (!ecec_bad.empty()) o.mean_ecec_incorrect = mean(ecec_bad);
  if (!ecec_ok.empty() && !ecec_bad.empty()) {
    o.ecec_rank_test_p = mann_whitney_u(ecec_bad, ecec_ok).p_two_sided;
  }
  o.euec_entropy_pearson = pearson(euec, ent);
  o.euec_entropy_spearman = spearman(euec, ent);
  return o;
}

EvaluationResult evaluate_dataset(const EpisodeSource& source, const EpisodeConfig& cfg,
                                  const ModelBundle& models, std::uint64_t seed, int parallel) {
  cfg.validate();
  const std::vector<ContextParams> bases = base_contexts(cfg, models.text->token_dim(), seed);
  return evaluate_dataset(source, cfg, models, bases, seed, parallel);
}

EvaluationResult evaluate_dataset(const EpisodeSource& source, const EpisodeConfig& cfg,
                                  const ModelBundle& models, std::span<const ContextParams> bases,
                                  std::uint64_t seed, int parallel) {
  cfg.validate();
  if (source.items.empty()) throw InvalidArgument("evaluate_dataset: empty dataset");
  if (!source.load) throw InvalidArgument("evaluate_dataset: source has no loader");
  if (bases.empty()) throw InvalidArgument("evaluate_dataset: no base context");

  const std::size_t n = source.items.size();
  std::vector<std::optional<EpisodeReport>> results(n);
  std::vector<std::exception_ptr> failures(n);
  auto work = [&](std::size_t i) {
    try {
      const std::optional<ImageTensor> img = source.load(i);
      if (!img) return;
      const RngStream rng = RngStream::derive(seed, i, "episode");
      EpisodeReport rep = prompt_ensemble_predict(*img, source.items[i].label, cfg, models, bases, rng);
      rep.image_id = source.items[i].image_id;
      results[i] = std::move(rep);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (parallel > 1) {
#pragma omp parallel for num_threads(parallel) schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) work(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) work(static_cast<std::size_t>(i));
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  EvaluationResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      out.episodes.push_back(std::move(*results[i]));
    } else {
      out.skipped_ids.push_back(source.items[i].image_id);
    }
  }
  out.outcome = summarize(out.episodes, out.skipped_ids.size());
  return out;
}

}  // namespace fcl
