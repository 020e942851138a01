#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcl/fcle.hpp"
#include "fcl/pipeline.hpp"

namespace fcl {

struct GraphTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

/// One loaded inference graph. Implementations must allow concurrent run().
class GraphRunner {
public:
  virtual ~GraphRunner() = default;
  /// Feeds the named inputs and returns the graph's first output.
  virtual GraphTensor run(std::span<const GraphTensor> inputs) const = 0;
};

/// ONNX Runtime session on `graph`. Throws BackendError when the engine was
/// built without ONNX Runtime or the graph cannot be loaded.
std::shared_ptr<const GraphRunner> make_onnx_runner(const std::filesystem::path& graph);
bool onnx_runtime_available() noexcept;

/// Vision graph: input "pixels" [B, 3, S, S] (standardized, NCHW) -> [B, d].
class GraphVisualEncoder final : public VisualEncoder {
public:
  static constexpr std::size_t batch_size = 16;

  GraphVisualEncoder(std::shared_ptr<const GraphRunner> runner, std::size_t image_size,
                     std::size_t dim,
                     PixelStandardization standardization = PixelStandardization::clip());

  std::size_t dim() const override { return dim_; }
  std::size_t input_height() const override { return size_; }
  std::size_t input_width() const override { return size_; }
  EmbeddingVector encode(const ImageTensor& img) const override;
  std::vector<EmbeddingVector> encode_batch(std::span<const ImageTensor> imgs,
                                            kernels::Exec exec) const override;

  /// NCHW f32 layout of one image, standardizing raw inputs.
  std::vector<float> to_planar(const ImageTensor& img) const;

private:
  std::shared_ptr<const GraphRunner> runner_;
  std::size_t size_;
  std::size_t dim_;
  PixelStandardization standardization_;
};

/// Text graph with embedding-level inputs: "context" [1, n_ctx, d_token]
/// (learnable tokens then any hard-prompt tokens) and "class_tokens"
/// [1, T, d_token] from the FCLE table -> [1, d]. Where the context sits
/// relative to the class tokens is decided by the exported graph.
class GraphTextEncoder final : public TextEncoder {
public:
  GraphTextEncoder(std::shared_ptr<const GraphRunner> runner, FcleTable class_tokens,
                   std::size_t dim);

  std::size_t dim() const override { return dim_; }
  std::size_t class_count() const override { return table_.classes; }
  std::size_t token_dim() const override { return table_.token_dim; }
  EmbeddingVector encode(std::size_t class_id, const ContextParams& ctx) const override;
  /// Central differences with a step sized for f32 graphs.
  Matrix encode_vjp(std::size_t class_id, const ContextParams& ctx,
                    std::span<const double> upstream) const override;

  static constexpr double fd_step = 1e-3;

private:
  std::shared_ptr<const GraphRunner> runner_;
  FcleTable table_;
  std::size_t dim_;
};

/// Encoders and vocabulary described by a verified export.
struct GraphModels {
  ModelBundle models;
  /// Token embeddings of the exported initial context, when the export has them.
  std::optional<Matrix> context_init;
};

/// Builds models from already-constructed runners; used by load_graph_models
/// and by tests with in-process graphs.
GraphModels make_graph_models(const VerifiedExport& exported,
                              std::shared_ptr<const GraphRunner> vision,
                              std::shared_ptr<const GraphRunner> text);

/// verify_export + ONNX Runtime sessions for both graphs.
GraphModels load_graph_models(const std::filesystem::path& manifest_path);

}  // namespace fcl
