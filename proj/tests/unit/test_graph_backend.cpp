#include <cmath>
#include <mutex>

#include "doctest.h"
#include "fcl/error.hpp"
#include "fcl/graph_backend.hpp"
#include "helpers.hpp"

using namespace fcl;

namespace {

/// Sums each input block into a fixed-width output and records every call.
class RecordingRunner final : public GraphRunner {
public:
  explicit RecordingRunner(std::size_t dim) : dim_(dim) {}

  GraphTensor run(std::span<const GraphTensor> inputs) const override {
    std::lock_guard lock(mu_);
    calls.emplace_back(inputs.begin(), inputs.end());
    const std::size_t batch = inputs[0].name == "pixels" ? static_cast<std::size_t>(inputs[0].shape[0]) : 1;
    GraphTensor out{"y", {static_cast<std::int64_t>(batch), static_cast<std::int64_t>(dim_)}, {}};
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t d = 0; d < dim_; ++d) {
        float acc = 1.0f + static_cast<float>(d);
        for (const GraphTensor& t : inputs) {
          const std::size_t per = t.data.size() / batch;
          for (std::size_t i = d; i < per; i += dim_) acc += t.data[b * per + i];
        }
        out.data.push_back(acc);
      }
    }
    return out;
  }

  mutable std::vector<std::vector<GraphTensor>> calls;

private:
  std::size_t dim_;
  mutable std::mutex mu_;
};

FcleTable tokens() {
  FcleTable t;
  t.classes = 3;
  t.tokens_per_class = 2;
  t.token_dim = 4;
  for (std::size_t i = 0; i < t.expected_size(); ++i) t.data.push_back(0.1f * static_cast<float>(i));
  return t;
}

}  // namespace

TEST_CASE("vision graph input is standardized NCHW") {
  auto runner = std::make_shared<RecordingRunner>(5);
  const GraphVisualEncoder enc(runner, 2, 5, PixelStandardization::identity());
  ImageTensor img(2, 2);
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = static_cast<double>(i);
  const auto planar = enc.to_planar(img);
  // Channel 0 plane first: pixels 0..3 at channel 0 are values 0, 3, 6, 9.
  CHECK(planar == std::vector<float>{0, 3, 6, 9, 1, 4, 7, 10, 2, 5, 8, 11});
  CHECK_THROWS_AS(enc.to_planar(ImageTensor(3, 2)), ShapeMismatch);
}

TEST_CASE("vision graph batches of at most batch_size images") {
  auto runner = std::make_shared<RecordingRunner>(5);
  const GraphVisualEncoder enc(runner, 4, 5);
  std::vector<ImageTensor> imgs;
  for (std::size_t i = 0; i < 20; ++i) imgs.push_back(test::random_image(4, 4, i));
  const auto z = enc.encode_batch(imgs, kernels::Exec::serial);
  REQUIRE(z.size() == 20);
  REQUIRE(runner->calls.size() == 2);
  CHECK(runner->calls[0][0].name == "pixels");
  CHECK(runner->calls[0][0].shape == std::vector<std::int64_t>{16, 3, 4, 4});
  CHECK(runner->calls[1][0].shape == std::vector<std::int64_t>{4, 3, 4, 4});
  const EmbeddingVector single = enc.encode(imgs[17]);
  for (std::size_t d = 0; d < 5; ++d) CHECK(single[d] == doctest::Approx(z[17][d]));
}

TEST_CASE("text graph receives context and class tokens as separate inputs") {
  auto runner = std::make_shared<RecordingRunner>(4);
  const GraphTextEncoder enc(runner, tokens(), 4);
  CHECK(enc.class_count() == 3);
  CHECK(enc.token_dim() == 4);
  Matrix learn(2, 4, 0.5);
  Matrix hard(1, 4, -0.25);
  const ContextParams ctx(learn, PromptMode::hard_prompt_prefix, hard);
  enc.encode(1, ctx);
  REQUIRE(runner->calls.size() == 1);
  const auto& in = runner->calls[0];
  REQUIRE(in.size() == 2);
  CHECK(in[0].name == "context");
  CHECK(in[0].shape == std::vector<std::int64_t>{1, 3, 4});
  CHECK(in[0].data[0] == 0.5f);
  CHECK(in[0].data[8] == -0.25f);
  CHECK(in[1].name == "class_tokens");
  CHECK(in[1].shape == std::vector<std::int64_t>{1, 2, 4});
  CHECK(in[1].data.front() == doctest::Approx(0.8f));
  CHECK_THROWS_AS(enc.encode(3, ctx), InvalidArgument);
  CHECK_THROWS_AS(enc.encode(0, ContextParams(Matrix(2, 3, 0.1))), ShapeMismatch);
}

TEST_CASE("text graph gradient by finite differences is close to exact for a linear graph") {
  auto runner = std::make_shared<RecordingRunner>(4);
  const GraphTextEncoder enc(runner, tokens(), 4);
  const ContextParams ctx(Matrix(2, 4, 0.3));
  const Vector upstream{1.0, -0.5, 0.25, 0.0};
  const Matrix g = enc.encode_vjp(0, ctx, upstream);
  CHECK(g.rows() == 2);
  CHECK(g.cols() == 4);
  for (double v : g.flat()) CHECK(std::isfinite(v));
}

TEST_CASE("make_graph_models wires a verified export") {
  VerifiedExport v;
  v.manifest.dim = 4;
  v.manifest.image_size = 4;
  v.manifest.classes = {"a", "b", "c"};
  v.class_tokens = tokens();
  FcleTable ctx;
  ctx.classes = 1;
  ctx.tokens_per_class = 2;
  ctx.token_dim = 4;
  ctx.data.assign(8, 0.5f);
  v.context_init = ctx;
  const GraphModels g =
      make_graph_models(v, std::make_shared<RecordingRunner>(4), std::make_shared<RecordingRunner>(4));
  CHECK(g.models.classes() == 3);
  CHECK(g.models.visual->input_height() == 4);
  CHECK(g.models.text->token_dim() == 4);
  REQUIRE(g.context_init.has_value());
  CHECK(g.context_init->rows() == 2);
  CHECK((*g.context_init)(1, 3) == 0.5);
}

TEST_CASE("ONNX runner reports a backend error when unavailable") {
  if (onnx_runtime_available()) return;
  CHECK_THROWS_AS(make_onnx_runner("missing.onnx"), BackendError);
}
