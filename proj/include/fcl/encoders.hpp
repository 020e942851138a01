#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcl/image.hpp"
#include "fcl/kernels.hpp"
#include "fcl/numerics.hpp"

namespace fcl {

/// Unit-norm feature vector produced by a visual or text encoder.
class EmbeddingVector {
public:
  EmbeddingVector() = default;

  /// Normalizes `raw`; throws DegenerateInput on a zero vector.
  static EmbeddingVector normalize(std::span<const double> raw);
  /// Wraps an already-unit vector, checking ||v|| = 1 within `tolerance`.
  static EmbeddingVector from_unit(Vector v, double tolerance = 1e-6);

  std::size_t dim() const noexcept { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  std::span<const double> values() const noexcept { return v_; }
  const Vector& vec() const noexcept { return v_; }

  bool operator==(const EmbeddingVector&) const = default;

private:
  explicit EmbeddingVector(Vector v) : v_(std::move(v)) {}
  Vector v_;
};

/// s = beta * <z, tau>. Throws ShapeMismatch on dimension mismatch.
double similarity(const EmbeddingVector& z, const EmbeddingVector& tau, double beta);

/// Rows of the returned matrix are the given embeddings.
Matrix stack_rows(std::span<const EmbeddingVector> embeddings);

enum class PromptMode {
  context,             ///< CL: the learnable tokens are the whole prompt context
  hard_prompt_prefix,  ///< CL-HP: learnable prefix tokens + a fixed hard prompt
};

/// The learnable text context δ. In CL-HP mode the encoder sees the token
/// sequence [learnable prefix ; hard prompt], and only the prefix is learned.
class ContextParams {
public:
  ContextParams() = default;
  explicit ContextParams(Matrix learnable, PromptMode mode = PromptMode::context,
                         Matrix hard_prompt = {});

  PromptMode mode() const noexcept { return mode_; }
  const Matrix& learnable() const noexcept { return learnable_; }
  Matrix& learnable() noexcept { return learnable_; }
  const Matrix& hard_prompt() const noexcept { return hard_prompt_; }

  std::size_t token_dim() const noexcept;
  std::size_t learnable_tokens() const noexcept { return learnable_.rows(); }
  std::size_t parameter_count() const noexcept { return learnable_.size(); }
  /// Learnable rows followed by hard-prompt rows.
  std::size_t total_tokens() const noexcept { return learnable_.rows() + hard_prompt_.rows(); }
  std::span<const double> token(std::size_t i) const;

  bool operator==(const ContextParams&) const = default;

private:
  Matrix learnable_;
  PromptMode mode_ = PromptMode::context;
  Matrix hard_prompt_;
};

/// Word-level pseudo-embeddings, one row per whitespace-separated word of
/// `words` ("{}" placeholders and punctuation are dropped). Each word's row
/// is a normal draw seeded by its stable hash.
Matrix word_token_embeddings(std::string_view words, std::size_t token_dim);

/// Builds δ0. CL: the words' token embeddings. CL-HP: `prefix_tokens` small
/// seeded normal rows (σ = 0.02) prepended to the words as a fixed hard prompt.
ContextParams make_context(std::string_view init_words, std::size_t token_dim, PromptMode mode,
                           std::size_t prefix_tokens, std::uint64_t seed);

struct ClassVocabulary {
  std::vector<std::string> names;
  std::vector<std::string> templates;

  std::size_t size() const noexcept { return names.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws InvalidArgument on empty or duplicate names.
  void validate() const;
};

enum class BackendKind { toy, graph };

struct EncoderConfig {
  double beta = 20.0;
  std::size_t dim = 64;
  BackendKind backend = BackendKind::toy;

  void validate() const;
};

class VisualEncoder {
public:
  virtual ~VisualEncoder() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t input_height() const = 0;
  virtual std::size_t input_width() const = 0;
  /// Accepts raw images (standardized internally) or already normalized ones.
  virtual EmbeddingVector encode(const ImageTensor& img) const = 0;
  /// Default: independent encode() calls, fanned out with OpenMP.
  virtual std::vector<EmbeddingVector> encode_batch(std::span<const ImageTensor> imgs,
                                                    kernels::Exec exec) const;
};

class TextEncoder {
public:
  virtual ~TextEncoder() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t class_count() const = 0;
  virtual std::size_t token_dim() const = 0;
  virtual EmbeddingVector encode(std::size_t class_id, const ContextParams& ctx) const = 0;

  /// d<tau_c(δ), upstream>/dδ over the learnable tokens, including the
  /// normalization Jacobian. Default: central finite differences.
  virtual Matrix encode_vjp(std::size_t class_id, const ContextParams& ctx,
                            std::span<const double> upstream) const;
};

/// Central-difference estimate of TextEncoder::encode_vjp; costs
/// 2 * ctx.parameter_count() forward passes.
Matrix finite_diff_vjp(const TextEncoder& enc, std::size_t class_id, const ContextParams& ctx,
                       std::span<const double> upstream, double h = 1e-5);

/// Text embeddings of `class_ids` under `ctx`, in order.
std::vector<EmbeddingVector> encode_classes(const TextEncoder& enc,
                                            std::span<const std::size_t> class_ids,
                                            const ContextParams& ctx);

// ---------------------------------------------------------------------------
// Toy backend

/// z = normalize(W * flatten(standardize(x)) + b), flatten in HWC order.
class ToyVisualEncoder final : public VisualEncoder {
public:
  ToyVisualEncoder(Matrix weights, Vector bias, std::size_t height, std::size_t width,
                   PixelStandardization standardization = PixelStandardization::identity());

  /// Weights ~ N(0, 1/inputs), bias ~ N(0, bias_scale²), drawn from `rng`.
  static ToyVisualEncoder random(std::size_t height, std::size_t width, std::size_t dim,
                                 RngStream rng, double bias_scale = 0.1);

  std::size_t dim() const override { return weights_.rows(); }
  std::size_t input_height() const override { return height_; }
  std::size_t input_width() const override { return width_; }
  EmbeddingVector encode(const ImageTensor& img) const override;
  std::vector<EmbeddingVector> encode_batch(std::span<const ImageTensor> imgs,
                                            kernels::Exec exec) const override;

  /// W * flatten(x) + b before normalization.
  Vector pre_normalization(const ImageTensor& img) const;

  const Matrix& weights() const noexcept { return weights_; }
  const Vector& bias() const noexcept { return bias_; }

private:
  std::span<const double> prepared(const ImageTensor& img, ImageTensor& scratch) const;

  Matrix weights_;
  Vector bias_;
  std::size_t height_;
  std::size_t width_;
  PixelStandardization standardization_;
};

/// Hash-seeded class pseudo-embeddings (one row per name). Throws
/// InvalidArgument if two names share a 64-bit hash.
Matrix class_pseudo_embeddings(std::span<const std::string> names, std::size_t class_dim);

/// tau_c(δ) = normalize(W * [mean of all context tokens ; e_c]).
class ToyTextEncoder final : public TextEncoder {
public:
  ToyTextEncoder(Matrix projection, Matrix class_embeddings, std::size_t token_dim);

  static ToyTextEncoder from_vocabulary(const ClassVocabulary& vocab, std::size_t dim,
                                        std::size_t token_dim, std::size_t class_dim,
                                        std::uint64_t seed);

  std::size_t dim() const override { return projection_.rows(); }
  std::size_t class_count() const override { return class_embeddings_.rows(); }
  std::size_t token_dim() const override { return token_dim_; }
  EmbeddingVector encode(std::size_t class_id, const ContextParams& ctx) const override;
  Matrix encode_vjp(std::size_t class_id, const ContextParams& ctx,
                    std::span<const double> upstream) const override;

  Vector pre_normalization(std::size_t class_id, const ContextParams& ctx) const;
  const Matrix& projection() const noexcept { return projection_; }
  const Matrix& class_embeddings() const noexcept { return class_embeddings_; }

private:
  void check(std::size_t class_id, const ContextParams& ctx) const;

  Matrix projection_;
  Matrix class_embeddings_;
  std::size_t token_dim_;
};

/// tau_c(δ) = normalize(offset_c + J_c * vec(learnable δ)).
/// Each class has its own sensitivity to the context, which lets synthetic
/// worlds plant exact text embeddings at δ = 0.
class AffineTextEncoder final : public TextEncoder {
public:
  AffineTextEncoder(Matrix offsets, std::vector<Matrix> jacobians, std::size_t token_dim);

  std::size_t dim() const override { return offsets_.cols(); }
  std::size_t class_count() const override { return offsets_.rows(); }
  std::size_t token_dim() const override { return token_dim_; }
  EmbeddingVector encode(std::size_t class_id, const ContextParams& ctx) const override;
  Matrix encode_vjp(std::size_t class_id, const ContextParams& ctx,
                    std::span<const double> upstream) const override;

  Vector pre_normalization(std::size_t class_id, const ContextParams& ctx) const;
  std::size_t parameter_count() const noexcept;

private:
  void check(std::size_t class_id, const ContextParams& ctx) const;

  Matrix offsets_;
  std::vector<Matrix> jacobians_;
  std::size_t token_dim_;
};

}  // namespace fcl
