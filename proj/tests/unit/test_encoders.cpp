#include <cmath>

#include "doctest.h"
#include "fcl/encoders.hpp"
#include "fcl/error.hpp"
#include "fcl/theorylab.hpp"
#include "helpers.hpp"

using namespace fcl;

namespace {

Vector random_vec(std::size_t n, std::uint64_t seed) {
  RngStream r(seed, 1);
  Vector v(n);
  for (double& x : v) x = r.normal();
  return v;
}

double rel_error(const Matrix& a, const Matrix& b) {
  double d = 0.0, n = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a.flat()[i] - b.flat()[i]) * (a.flat()[i] - b.flat()[i]);
    n += b.flat()[i] * b.flat()[i];
  }
  return std::sqrt(d / n);
}

}  // namespace

TEST_CASE("EmbeddingVector is unit norm") {
  const EmbeddingVector e = EmbeddingVector::normalize(Vector{1.0, 2.0, 2.0});
  CHECK(norm(e.values()) == doctest::Approx(1.0));
  CHECK(e[0] == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(EmbeddingVector::normalize(Vector{0.0, 0.0}), DegenerateInput);
  CHECK_THROWS(EmbeddingVector::from_unit(Vector{1.0, 1.0}));
  CHECK_THROWS_AS(similarity(e, EmbeddingVector::normalize(Vector{1.0, 0.0}), 20.0), ShapeMismatch);
}

TEST_CASE("similarity is beta times the cosine") {
  const EmbeddingVector a = EmbeddingVector::normalize(Vector{1.0, 0.0});
  const EmbeddingVector b = EmbeddingVector::normalize(Vector{1.0, 1.0});
  CHECK(similarity(a, b, 20.0) == doctest::Approx(20.0 / std::sqrt(2.0)));
}

TEST_CASE("ContextParams layouts") {
  const ContextParams cl = make_context("a photo of a", 6, PromptMode::context, 4, 1);
  CHECK(cl.learnable_tokens() == 4);
  CHECK(cl.total_tokens() == 4);
  CHECK(cl.parameter_count() == 24);
  // Identical words share one embedding.
  CHECK(std::equal(cl.token(0).begin(), cl.token(0).end(), cl.token(3).begin()));

  const ContextParams hp = make_context("a photo of a {}.", 6, PromptMode::hard_prompt_prefix, 3, 1);
  CHECK(hp.mode() == PromptMode::hard_prompt_prefix);
  CHECK(hp.learnable_tokens() == 3);
  CHECK(hp.hard_prompt().rows() == 4);
  CHECK(hp.total_tokens() == 7);
  CHECK(std::equal(hp.token(3).begin(), hp.token(3).end(), cl.token(0).begin()));
  for (double v : hp.learnable().flat()) CHECK(std::abs(v) < 0.2);

  CHECK_THROWS_AS(ContextParams(Matrix(2, 3), PromptMode::context, Matrix(1, 3)), InvalidArgument);
  CHECK_THROWS_AS(ContextParams(Matrix(2, 3), PromptMode::hard_prompt_prefix, Matrix(1, 4)),
                  ShapeMismatch);
  CHECK_THROWS(make_context("", 6, PromptMode::context, 0, 1));
}

TEST_CASE("ClassVocabulary validation") {
  ClassVocabulary v = test::vocabulary(3);
  CHECK_NOTHROW(v.validate());
  CHECK(v.find("class1") == 1);
  CHECK_FALSE(v.find("nope").has_value());
  v.names.push_back("class1");
  CHECK_THROWS_AS(v.validate(), InvalidArgument);
  CHECK_THROWS_AS(ClassVocabulary{}.validate(), InvalidArgument);
}

TEST_CASE("toy visual encoder: unit output, batch equals single") {
  const ToyVisualEncoder enc = ToyVisualEncoder::random(6, 5, 12, RngStream(1, 2));
  std::vector<ImageTensor> imgs;
  for (std::uint64_t s = 0; s < 5; ++s) imgs.push_back(test::random_image(6, 5, s));
  const auto batch = enc.encode_batch(imgs, kernels::Exec::parallel);
  const auto serial = enc.encode_batch(imgs, kernels::Exec::serial);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    CHECK(batch[i] == enc.encode(imgs[i]));
    CHECK(batch[i] == serial[i]);
    CHECK(norm(batch[i].values()) == doctest::Approx(1.0));
  }
  CHECK_THROWS(enc.encode(test::random_image(5, 5, 1)));
}

TEST_CASE("toy text encoder: analytic VJP matches finite differences") {
  const ToyTextEncoder enc = ToyTextEncoder::from_vocabulary(test::vocabulary(4), 10, 6, 5, 3);
  for (PromptMode mode : {PromptMode::context, PromptMode::hard_prompt_prefix}) {
    ContextParams ctx = make_context("a photo of a", 6, mode, 2, 3);
    for (double& v : ctx.learnable().flat()) v += 0.1;
    const Vector up = random_vec(10, 4);
    for (std::size_t c = 0; c < 4; ++c) {
      const Matrix analytic = enc.encode_vjp(c, ctx, up);
      const Matrix numeric = finite_diff_vjp(enc, c, ctx, up);
      CHECK(analytic.rows() == ctx.learnable_tokens());
      CHECK(rel_error(analytic, numeric) < 1e-6);
    }
  }
}

TEST_CASE("toy text encoder depends on the hard prompt in CL-HP") {
  const ToyTextEncoder enc = ToyTextEncoder::from_vocabulary(test::vocabulary(2), 10, 6, 5, 3);
  const ContextParams a = make_context("a photo of a", 6, PromptMode::hard_prompt_prefix, 2, 3);
  const ContextParams b = make_context("art of the", 6, PromptMode::hard_prompt_prefix, 2, 3);
  CHECK_FALSE(enc.encode(0, a) == enc.encode(0, b));
}

TEST_CASE("class pseudo-embeddings are deterministic per name") {
  const std::vector<std::string> n1{"cat", "dog"};
  const std::vector<std::string> n2{"dog", "cat"};
  const Matrix a = class_pseudo_embeddings(n1, 7);
  const Matrix b = class_pseudo_embeddings(n2, 7);
  CHECK(std::equal(a.row(0).begin(), a.row(0).end(), b.row(1).begin()));
}

TEST_CASE("affine text encoder: exact planted embedding at zero and analytic VJP") {
  theory::WorldSpec w;
  w.classes = 3;
  w.dim = 12;
  w.common_alignment = {0.3, 0.4, 0.5};
  w.self_alignment = {0.6, 0.6, 0.6};
  w.context_sensitivity = 1.5;
  w.seed = 9;
  const theory::SyntheticWorld world(w);
  const AffineTextEncoder& enc = world.text();
  const ContextParams zero = world.base_context();
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(dot(enc.encode(c, zero).values(), world.common()) ==
          doctest::Approx(w.common_alignment[c]).epsilon(1e-12));
    CHECK(dot(enc.encode(c, zero).values(), world.unique(c)) ==
          doctest::Approx(w.self_alignment[c]).epsilon(1e-12));
  }
  ContextParams ctx = zero;
  RngStream r(1, 1);
  for (double& v : ctx.learnable().flat()) v = 0.05 * r.normal();
  const Vector up = random_vec(12, 8);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(rel_error(enc.encode_vjp(c, ctx, up), finite_diff_vjp(enc, c, ctx, up)) < 1e-6);
  }
  CHECK_THROWS_AS(enc.encode(5, ctx), InvalidArgument);
  CHECK_THROWS_AS(enc.encode(0, ContextParams(Matrix(1, 2))), ShapeMismatch);
}
