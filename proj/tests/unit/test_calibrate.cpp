#include <cmath>

#include "doctest.h"
#include "fcl/calibrate.hpp"
#include "fcl/error.hpp"
#include "helpers.hpp"

using namespace fcl;

namespace {

EmbeddingVector random_embedding(std::size_t dim, std::uint64_t stream) {
  RngStream rng(77, stream);
  Vector v(dim);
  for (double& x : v) x = rng.normal();
  return EmbeddingVector::normalize(v);
}

struct Fixture {
  ModelBundle models = test::toy_bundle(5, 8, 12, 9);
  ContextParams base = make_context("a photo of a", 8, PromptMode::context, 0, 1);

  CalibrationObjective objective(std::vector<std::size_t> candidates, CalibConfig cfg = {}) const {
    PairSet pairs;
    std::uint64_t stream = 0;
    for (std::size_t a = 0; a < candidates.size(); ++a) {
      for (std::size_t b = a + 1; b < candidates.size(); ++b) {
        pairs.pairs.push_back({candidates[a], candidates[b], random_embedding(12, ++stream), 0.8});
      }
    }
    return CalibrationObjective(*models.text, std::move(candidates), std::move(pairs), base,
                                random_embedding(12, 100), 20.0, cfg);
  }
};

}  // namespace

TEST_CASE("pair_count") {
  CHECK(pair_count(0) == 0);
  CHECK(pair_count(1) == 0);
  CHECK(pair_count(2) == 1);
  CHECK(pair_count(10) == 45);
}

TEST_CASE("pair_weight is one at balance and zero at certainty") {
  CHECK(pair_weight(0.5, 0.5) == 1.0);
  CHECK(pair_weight(1.0, 0.0) == 0.0);
  CHECK(pair_weight(0.3, 0.2) == doctest::Approx(0.9));
  CHECK(pair_weight(0.7, 0.1) == doctest::Approx(0.4));
}

TEST_CASE("calibration loss against hand values and its bounds") {
  const ProbDist u = ProbDist::uniform(2);
  const ProbDist sharp = ProbDist::from_probs({1.0, 0.0});
  CHECK(calibration_loss(std::vector<double>{1.0}, std::vector<ProbDist>{u}) == 0.0);
  // JS((1, 0) ‖ (1/2, 1/2)) with mixture (3/4, 1/4).
  const double js = 0.5 * std::log(4.0 / 3.0) + 0.25 * std::log(2.0 / 3.0) + 0.25 * std::log(2.0);
  CHECK(calibration_loss(std::vector<double>{1.0}, std::vector<ProbDist>{sharp}) ==
        doctest::Approx(js).epsilon(1e-12));
  CHECK(calibration_loss(std::vector<double>{0.5, 1.0}, std::vector<ProbDist>{sharp, u}) ==
        doctest::Approx(0.25 * js).epsilon(1e-12));
  CHECK(js <= std::log(2.0));
  CHECK(calibration_loss({}, {}) == 0.0);
  CHECK_THROWS_AS(calibration_loss(std::vector<double>{1.0}, {}), ShapeMismatch);
}

TEST_CASE("alignment loss") {
  CHECK(alignment_loss(std::vector<double>{1.0, 1.0}) == 0.0);
  CHECK(alignment_loss(std::vector<double>{-1.0}) == 2.0);
  CHECK(alignment_loss(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.7));
}

TEST_CASE("pairwise posterior rejects identical classes") {
  const Fixture f;
  const EmbeddingVector z = random_embedding(12, 1);
  const ProbDist p = pairwise_posterior(z, 0, 1, *f.models.text, f.base, 20.0);
  CHECK(p.size() == 2);
  CHECK_THROWS_AS(pairwise_posterior(z, 2, 2, *f.models.text, f.base, 20.0), InvalidArgument);
}

TEST_CASE("objective gradient matches central differences") {
  const Fixture f;
  const CalibrationObjective obj = f.objective({0, 2, 4});
  Matrix grad;
  const LossValues l = obj.evaluate(f.base, grad);
  CHECK(l.total == doctest::Approx(l.cal + l.align));
  CHECK(l.cal >= 0.0);
  CHECK(l.cal <= std::log(2.0));
  CHECK(l.align >= 0.0);
  CHECK(l.align <= 2.0);
  REQUIRE(grad.rows() == f.base.learnable().rows());
  REQUIRE(grad.cols() == f.base.learnable().cols());
  const double h = 1e-6;
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    for (std::size_t j = 0; j < grad.cols(); ++j) {
      ContextParams plus = f.base;
      ContextParams minus = f.base;
      plus.learnable()(i, j) += h;
      minus.learnable()(i, j) -= h;
      const double fd = (obj.evaluate(plus).total - obj.evaluate(minus).total) / (2 * h);
      CHECK(grad(i, j) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("calibrate_context records steps + 1 losses and moves the context") {
  const Fixture f;
  CalibConfig cfg;
  cfg.steps = 3;
  const CalibResult r = calibrate_context(f.objective({1, 2, 3}, cfg));
  CHECK_FALSE(r.trace.skipped);
  CHECK_FALSE(r.trace.fell_back);
  CHECK(r.trace.losses.size() == 4);
  CHECK(r.trace.initial == f.base);
  CHECK(r.trace.final == r.delta);
  CHECK_FALSE(r.delta == f.base);
  CHECK(r.trace.base_pairwise.size() == 3);
}

TEST_CASE("calibration is skipped with fewer than two candidates") {
  const Fixture f;
  const CalibResult r = calibrate_context(f.objective({3}));
  CHECK(r.trace.skipped);
  CHECK(r.delta == f.base);
}

TEST_CASE("objective rejects malformed pairs") {
  const Fixture f;
  PairSet bad;
  bad.pairs.push_back({1, 1, random_embedding(12, 1), 1.0});
  CHECK_THROWS_AS(CalibrationObjective(*f.models.text, {1, 2}, bad, f.base,
                                       random_embedding(12, 2), 20.0, CalibConfig{}),
                  InvalidArgument);
  PairSet heavy;
  heavy.pairs.push_back({1, 2, random_embedding(12, 1), 1.5});
  CHECK_THROWS_AS(CalibrationObjective(*f.models.text, {1, 2}, heavy, f.base,
                                       random_embedding(12, 2), 20.0, CalibConfig{}),
                  InvalidArgument);
}
