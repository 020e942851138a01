#include "fcl/graph_backend.hpp"

#include <algorithm>
#include <cmath>

#include "fcl/error.hpp"

#ifdef FCL_HAVE_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>
#endif

namespace fcl {

namespace {

[[maybe_unused]] std::size_t element_count(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (std::int64_t s : shape) {
    if (s < 0) throw BackendError("graph output has a dynamic dimension");
    n *= static_cast<std::size_t>(s);
  }
  return n;
}

EmbeddingVector normalize_row(std::span<const float> row) {
  Vector v(row.begin(), row.end());
  if (!all_finite(v)) throw BackendError("graph produced a non-finite embedding");
  return EmbeddingVector::normalize(v);
}

}  // namespace

#ifdef FCL_HAVE_ONNXRUNTIME

namespace {

class OnnxRunner final : public GraphRunner {
public:
  explicit OnnxRunner(const std::filesystem::path& graph)
      : env_(ORT_LOGGING_LEVEL_WARNING, "fcl"), session_(nullptr) {
    Ort::SessionOptions opts;
    opts.SetIntraOpNumThreads(1);
    session_ = Ort::Session(env_, graph.c_str(), opts);
    Ort::AllocatorWithDefaultOptions alloc;
    output_name_ = session_.GetOutputNameAllocated(0, alloc).get();
  }

  GraphTensor run(std::span<const GraphTensor> inputs) const override {
    const Ort::MemoryInfo mem = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    std::vector<Ort::Value> values;
    std::vector<const char*> names;
    for (const GraphTensor& t : inputs) {
      names.push_back(t.name.c_str());
      values.push_back(Ort::Value::CreateTensor<float>(
          mem, const_cast<float*>(t.data.data()), t.data.size(), t.shape.data(), t.shape.size()));
    }
    const char* out_name = output_name_.c_str();
    auto outputs = const_cast<Ort::Session&>(session_).Run(
        Ort::RunOptions{nullptr}, names.data(), values.data(), values.size(), &out_name, 1);
    GraphTensor out;
    out.name = output_name_;
    out.shape = outputs.front().GetTensorTypeAndShapeInfo().GetShape();
    const float* data = outputs.front().GetTensorData<float>();
    out.data.assign(data, data + element_count(out.shape));
    return out;
  }

private:
  Ort::Env env_;
  Ort::Session session_;
  std::string output_name_;
};

}  // namespace

std::shared_ptr<const GraphRunner> make_onnx_runner(const std::filesystem::path& graph) {
  try {
    return std::make_shared<OnnxRunner>(graph);
  } catch (const Ort::Exception& e) {
    throw BackendError("cannot load graph " + graph.string() + ": " + e.what());
  }
}

bool onnx_runtime_available() noexcept { return true; }

#else

std::shared_ptr<const GraphRunner> make_onnx_runner(const std::filesystem::path& graph) {
  throw BackendError("cannot load " + graph.string() +
                     ": built without ONNX Runtime (configure with -DFCL_WITH_ONNXRUNTIME=ON)");
}

bool onnx_runtime_available() noexcept { return false; }

#endif

// ---------------------------------------------------------------------------

GraphVisualEncoder::GraphVisualEncoder(std::shared_ptr<const GraphRunner> runner,
                                       std::size_t image_size, std::size_t dim,
                                       PixelStandardization standardization)
    : runner_(std::move(runner)), size_(image_size), dim_(dim), standardization_(standardization) {
  if (!runner_) throw BackendError("graph visual encoder: no runner");
  if (size_ == 0 || dim_ == 0) throw InvalidArgument("graph visual encoder: zero size");
}

std::vector<float> GraphVisualEncoder::to_planar(const ImageTensor& img) const {
  if (img.height != size_ || img.width != size_) {
    throw ShapeMismatch("graph visual encoder expects " + std::to_string(size_) + "x" +
                        std::to_string(size_) + " input, got " + std::to_string(img.height) + "x" +
                        std::to_string(img.width));
  }
  const ImageTensor x = img.normalized ? img : standardize(img, standardization_);
  const std::size_t plane = size_ * size_;
  std::vector<float> out(ImageTensor::channels * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < ImageTensor::channels; ++c) {
      out[c * plane + p] = static_cast<float>(x.values[p * ImageTensor::channels + c]);
    }
  }
  return out;
}

EmbeddingVector GraphVisualEncoder::encode(const ImageTensor& img) const {
  return encode_batch(std::span(&img, 1), kernels::Exec::serial).front();
}

std::vector<EmbeddingVector> GraphVisualEncoder::encode_batch(std::span<const ImageTensor> imgs,
                                                              kernels::Exec) const {
  std::vector<EmbeddingVector> out;
  out.reserve(imgs.size());
  const std::size_t per_image = ImageTensor::channels * size_ * size_;
  for (std::size_t begin = 0; begin < imgs.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, imgs.size() - begin);
    GraphTensor input{"pixels",
                      {static_cast<std::int64_t>(count), 3, static_cast<std::int64_t>(size_),
                       static_cast<std::int64_t>(size_)},
                      {}};
    input.data.reserve(count * per_image);
    for (std::size_t i = 0; i < count; ++i) {
      const auto planar = to_planar(imgs[begin + i]);
      input.data.insert(input.data.end(), planar.begin(), planar.end());
    }
    const GraphTensor y = runner_->run(std::span(&input, 1));
    if (y.data.size() != count * dim_) {
      throw BackendError("vision graph returned " + std::to_string(y.data.size()) +
                         " values, expected " + std::to_string(count * dim_));
    }
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(normalize_row(std::span(y.data).subspan(i * dim_, dim_)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

GraphTextEncoder::GraphTextEncoder(std::shared_ptr<const GraphRunner> runner,
                                   FcleTable class_tokens, std::size_t dim)
    : runner_(std::move(runner)), table_(std::move(class_tokens)), dim_(dim) {
  if (!runner_) throw BackendError("graph text encoder: no runner");
  if (table_.data.size() != table_.expected_size() || table_.classes == 0) {
    throw InvalidArgument("graph text encoder: malformed class-token table");
  }
  if (dim_ == 0) throw InvalidArgument("graph text encoder: zero dimension");
}

EmbeddingVector GraphTextEncoder::encode(std::size_t class_id, const ContextParams& ctx) const {
  if (class_id >= class_count()) throw InvalidArgument("unknown class id " + std::to_string(class_id));
  if (ctx.total_tokens() == 0) throw InvalidArgument("context has no tokens");
  if (ctx.token_dim() != table_.token_dim) throw ShapeMismatch("context token width mismatch");
  const auto td = static_cast<std::int64_t>(table_.token_dim);

  GraphTensor inputs[2];
  inputs[0].name = "context";
  inputs[0].shape = {1, static_cast<std::int64_t>(ctx.total_tokens()), td};
  inputs[0].data.reserve(ctx.total_tokens() * table_.token_dim);
  for (std::size_t t = 0; t < ctx.total_tokens(); ++t) {
    for (double v : ctx.token(t)) inputs[0].data.push_back(static_cast<float>(v));
  }
  const auto block = table_.class_block(class_id);
  inputs[1].name = "class_tokens";
  inputs[1].shape = {1, static_cast<std::int64_t>(table_.tokens_per_class), td};
  inputs[1].data.assign(block.begin(), block.end());

  const GraphTensor y = runner_->run(inputs);
  if (y.data.size() != dim_) {
    throw BackendError("text graph returned " + std::to_string(y.data.size()) +
                       " values, expected " + std::to_string(dim_));
  }
  return normalize_row(y.data);
}

Matrix GraphTextEncoder::encode_vjp(std::size_t class_id, const ContextParams& ctx,
                                    std::span<const double> upstream) const {
  return finite_diff_vjp(*this, class_id, ctx, upstream, fd_step);
}

// ---------------------------------------------------------------------------

GraphModels make_graph_models(const VerifiedExport& exported,
                              std::shared_ptr<const GraphRunner> vision,
                              std::shared_ptr<const GraphRunner> text) {
  const ExportManifest& m = exported.manifest;
  GraphModels out;
  out.models.vocab.names = m.classes;
  out.models.vocab.templates = m.templates;
  out.models.vocab.validate();
  out.models.visual = std::make_shared<GraphVisualEncoder>(std::move(vision), m.image_size, m.dim);
  out.models.text = std::make_shared<GraphTextEncoder>(std::move(text), exported.class_tokens, m.dim);
  if (exported.context_init) {
    const FcleTable& c = *exported.context_init;
    Matrix tokens(c.tokens_per_class, c.token_dim);
    std::transform(c.data.begin(), c.data.end(), tokens.flat().begin(),
                   [](float v) { return static_cast<double>(v); });
    out.context_init = std::move(tokens);
  }
  return out;
}

GraphModels load_graph_models(const std::filesystem::path& manifest_path) {
  const VerifiedExport exported = verify_export(manifest_path);
  const ExportManifest& m = exported.manifest;
  auto vision = make_onnx_runner(resolve_artifact(exported.directory, m.vision_graph));
  auto text = make_onnx_runner(resolve_artifact(exported.directory, m.text_graph));
  return make_graph_models(exported, std::move(vision), std::move(text));
}

}  // namespace fcl
