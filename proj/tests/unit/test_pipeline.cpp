#include <cmath>

#include "doctest.h"
#include "fcl/error.hpp"
#include "fcl/pipeline.hpp"
#include "helpers.hpp"

using namespace fcl;

namespace {

EmbeddingVector unit(double x, double y) { return EmbeddingVector::from_unit(Vector{x, y}); }

EpisodeSource random_source(std::size_t n, std::size_t classes) {
  EpisodeSource s;
  for (std::size_t i = 0; i < n; ++i) s.items.push_back({"img" + std::to_string(i), i % classes});
  s.load = [](std::size_t i) -> std::optional<ImageTensor> {
    if (i == 3) return std::nullopt;
    return test::random_image(12, 10, 40 + i);
  };
  return s;
}

}  // namespace

TEST_CASE("ECEC against a hand computation") {
  const EmbeddingVector z = unit(1, 0);
  const EmbeddingVector pred = unit(1, 0);
  const std::vector<EmbeddingVector> comp{unit(0, 1), unit(-1, 0)};
  const std::vector<EmbeddingVector> common{unit(0.8, 0.6), unit(1, 0)};
  // Numerator 0.2 + 2, denominator 1 + 2.
  CHECK(compute_ecec(z, pred, comp, common, 1e-6) == doctest::Approx(2.2 / 3.0));
  // Negative common terms are clipped; tiny denominators are floored at eps.
  const std::vector<EmbeddingVector> against{unit(0.6, 0.8)};
  CHECK(compute_ecec(unit(0, 1), pred, std::vector{unit(0, 1)}, against, 0.5) == 0.0);
  CHECK_THROWS_AS(compute_ecec(z, pred, {}, {}, 1e-6), InvalidArgument);
  CHECK_THROWS_AS(compute_ecec(z, pred, comp, against, 1e-6), ShapeMismatch);
}

TEST_CASE("EUEC is the mean alignment of the unique embeddings") {
  const std::vector<EmbeddingVector> unique{unit(0.6, 0.8), unit(1, 0)};
  CHECK(compute_euec(unique, unit(1, 0)) == doctest::Approx(0.8));
  CHECK_THROWS_AS(compute_euec({}, unit(1, 0)), InvalidArgument);
}

TEST_CASE("ensemble vote: majority, then summed fraction, then lower id") {
  CHECK(ensemble_vote(std::vector<TemplateOutcome>{{4, 0.2}, {4, 0.3}, {1, 0.9}}) == 4);
  CHECK(ensemble_vote(std::vector<TemplateOutcome>{{2, 0.5}, {1, 0.6}, {2, 0.3}, {1, 0.4}}) == 1);
  CHECK(ensemble_vote(std::vector<TemplateOutcome>{{3, 0.5}, {1, 0.5}}) == 1);
}

TEST_CASE("an episode is a pure function of its inputs") {
  const auto models = test::toy_bundle(6, 8, 16, 2);
  const EpisodeConfig cfg = test::small_episode(8);
  const auto bases = base_contexts(cfg, 8, 1);
  REQUIRE(bases.size() == 1);
  const ImageTensor img = test::random_image(11, 9, 6);
  const RngStream rng = RngStream::derive(1, 0, "episode");
  const EpisodeReport a = run_episode(img, 2, cfg, models, bases[0], rng);
  const EpisodeReport b = run_episode(img, 2, cfg, models, bases[0], rng);
  CHECK(a.prediction == b.prediction);
  CHECK(a.ecec == b.ecec);
  CHECK(a.euec == b.euec);
  CHECK(a.view_entropies == b.view_entropies);
  CHECK(a.calibration.final == b.calibration.final);

  CHECK(a.candidates.class_ids.size() == 3);
  CHECK(a.final_ranking.class_ids.size() == 3);
  CHECK(a.view_entropies.size() == cfg.augment.views);
  CHECK(a.calibration.losses.size() == cfg.calibrate.steps + 1);
  CHECK(std::find(a.candidates.class_ids.begin(), a.candidates.class_ids.end(), a.prediction) !=
        a.candidates.class_ids.end());
  CHECK(a.zero_shot == a.candidates.top());
  CHECK_FALSE(a.degraded);
}

TEST_CASE("top-1 candidate sets skip calibration") {
  const auto models = test::toy_bundle(6, 8, 16, 2);
  EpisodeConfig cfg = test::small_episode(8);
  cfg.explore.top_k = 1;
  const auto bases = base_contexts(cfg, 8, 1);
  const EpisodeReport r =
      run_episode(test::random_image(8, 8, 1), std::nullopt, cfg, models, bases[0], RngStream(1, 1));
  CHECK(r.calibration.skipped);
  CHECK(r.prediction == r.zero_shot);
  CHECK_FALSE(r.ecec.has_value());
}

TEST_CASE("prompt ensembles record one outcome per template") {
  const auto models = test::toy_bundle(6, 8, 16, 2);
  EpisodeConfig cfg = test::small_episode(8);
  cfg.templates = {"a photo of a {}.", "a blurry photo of a {}.", "art of the {}."};
  const auto bases = base_contexts(cfg, 8, 1);
  REQUIRE(bases.size() == 3);
  const EpisodeReport r = prompt_ensemble_predict(test::random_image(8, 8, 2), 0, cfg, models,
                                                  bases, RngStream(3, 3));
  REQUIRE(r.ensemble.size() == 3);
  CHECK(r.prediction == ensemble_vote(r.ensemble));
}

TEST_CASE("evaluation does not depend on the number of workers") {
  const auto models = test::toy_bundle(5, 8, 16, 4);
  const EpisodeConfig cfg = test::small_episode(8);
  const EpisodeSource src = random_source(7, 5);
  const EvaluationResult serial = evaluate_dataset(src, cfg, models, 13, 1);
  const EvaluationResult par = evaluate_dataset(src, cfg, models, 13, 4);
  REQUIRE(serial.episodes.size() == 6);
  REQUIRE(par.episodes.size() == 6);
  CHECK(serial.skipped_ids == std::vector<std::string>{"img3"});
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(serial.episodes[i].image_id == par.episodes[i].image_id);
    CHECK(serial.episodes[i].prediction == par.episodes[i].prediction);
    CHECK(serial.episodes[i].ecec == par.episodes[i].ecec);
    CHECK(serial.episodes[i].calibration.final == par.episodes[i].calibration.final);
  }
  CHECK(serial.outcome.skipped == 1);
  CHECK(serial.outcome.episodes == 6);
  CHECK(serial.outcome.accuracy == par.outcome.accuracy);
}

TEST_CASE("summarize counts labelled episodes and splits ECEC by zero-shot correctness") {
  std::vector<EpisodeReport> eps(4);
  eps[0].label = 1, eps[0].prediction = 1, eps[0].zero_shot = 1, eps[0].ecec = 0.2;
  eps[1].label = 1, eps[1].prediction = 2, eps[1].zero_shot = 2, eps[1].ecec = 0.6;
  eps[2].label = 0, eps[2].prediction = 0, eps[2].zero_shot = 2, eps[2].ecec = 0.8;
  eps[3].prediction = 3;
  const PredictionOutcome o = summarize(eps, 2);
  CHECK(o.episodes == 4);
  CHECK(o.labelled == 3);
  CHECK(o.skipped == 2);
  CHECK(o.accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(o.zero_shot_accuracy == doctest::Approx(1.0 / 3.0));
  REQUIRE(o.mean_ecec_correct.has_value());
  REQUIRE(o.mean_ecec_incorrect.has_value());
  CHECK(*o.mean_ecec_correct == doctest::Approx(0.2));
  CHECK(*o.mean_ecec_incorrect == doctest::Approx(0.7));
}
