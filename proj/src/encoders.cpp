#include "fcl/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "fcl/error.hpp"

namespace fcl {

EmbeddingVector EmbeddingVector::normalize(std::span<const double> raw) {
  return EmbeddingVector(l2_normalize(raw));
}

EmbeddingVector EmbeddingVector::from_unit(Vector v, double tolerance) {
  if (!all_finite(v)) throw NonFinite("embedding contains a non-finite value");
  const double n = norm(v);
  if (std::abs(n - 1.0) > tolerance) {
    throw InvalidArgument("embedding is not unit-norm (norm " + std::to_string(n) + ")");
  }
  return EmbeddingVector(std::move(v));
}

double similarity(const EmbeddingVector& z, const EmbeddingVector& tau, double beta) {
  if (z.dim() != tau.dim()) throw ShapeMismatch("similarity: embedding dimensions differ");
  return beta * dot(z.values(), tau.values());
}

Matrix stack_rows(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.empty()) return {};
  Matrix m(embeddings.size(), embeddings.front().dim());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].dim() != m.cols()) throw ShapeMismatch("stack_rows: ragged embeddings");
    std::copy(embeddings[i].vec().begin(), embeddings[i].vec().end(), m.row(i).begin());
  }
  return m;
}

// ---------------------------------------------------------------------------

ContextParams::ContextParams(Matrix learnable, PromptMode mode, Matrix hard_prompt)
    : learnable_(std::move(learnable)), mode_(mode), hard_prompt_(std::move(hard_prompt)) {
  if (mode_ == PromptMode::context && hard_prompt_.rows() != 0) {
    throw InvalidArgument("ContextParams: hard prompt tokens require CL-HP mode");
  }
  if (learnable_.rows() != 0 && hard_prompt_.rows() != 0 &&
      learnable_.cols() != hard_prompt_.cols()) {
    throw ShapeMismatch("ContextParams: prefix and hard-prompt token widths differ");
  }
  if (!all_finite(learnable_.flat()) || !all_finite(hard_prompt_.flat())) {
    throw NonFinite("ContextParams: non-finite token value");
  }
}

std::size_t ContextParams::token_dim() const noexcept {
  return learnable_.rows() != 0 ? learnable_.cols() : hard_prompt_.cols();
}

std::span<const double> ContextParams::token(std::size_t i) const {
  if (i < learnable_.rows()) return learnable_.row(i);
  return hard_prompt_.row(i - learnable_.rows());
}

namespace {

std::vector<std::string> prompt_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(current);
    current.clear();
  };
  bool placeholder = false;
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      if (!placeholder) flush();
      current.clear();
      placeholder = false;
    } else if (raw == '{' || raw == '}') {
      placeholder = true;
    } else if (std::isalnum(ch) || raw == '-' || raw == '\'') {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  if (!placeholder) flush();
  return words;
}

}  // namespace

Matrix word_token_embeddings(std::string_view words, std::size_t token_dim) {
  const auto list = prompt_words(words);
  Matrix m(list.size(), token_dim);
  for (std::size_t i = 0; i < list.size(); ++i) {
    RngStream rng(stable_hash("word:" + list[i]), 0);
    for (double& v : m.row(i)) v = rng.normal();
  }
  return m;
}

ContextParams make_context(std::string_view init_words, std::size_t token_dim, PromptMode mode,
                           std::size_t prefix_tokens, std::uint64_t seed) {
  Matrix words = word_token_embeddings(init_words, token_dim);
  if (mode == PromptMode::context) {
    if (words.rows() == 0) throw InvalidArgument("context init has no words");
    return ContextParams(std::move(words), mode);
  }
  if (prefix_tokens == 0 && words.rows() == 0) {
    throw InvalidArgument("CL-HP context needs prefix tokens or a hard prompt");
  }
  Matrix prefix(prefix_tokens, token_dim);
  RngStream rng = RngStream::derive(seed, 0, "clhp-prefix");
  for (double& v : prefix.flat()) v = 0.02 * rng.normal();
  return ContextParams(std::move(prefix), mode, std::move(words));
}

std::optional<std::size_t> ClassVocabulary::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

void ClassVocabulary::validate() const {
  if (names.empty()) throw InvalidArgument("class vocabulary is empty");
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw InvalidArgument("class name " + std::to_string(i) + " is empty");
    if (!seen.emplace(names[i], i).second) {
      throw InvalidArgument("duplicate class name '" + names[i] + "'");
    }
  }
}

void EncoderConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("$.encoder.beta", "must be > 0");
  if (dim == 0) throw ConfigError("$.encoder.dim", "must be > 0");
}

// ---------------------------------------------------------------------------

std::vector<EmbeddingVector> VisualEncoder::encode_batch(std::span<const ImageTensor> imgs,
                                                         kernels::Exec exec) const {
  std::vector<EmbeddingVector> out(imgs.size());
  const auto n = static_cast<std::ptrdiff_t>(imgs.size());
  if (exec == kernels::Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = encode(imgs[i]);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = encode(imgs[i]);
  }
  return out;
}

Matrix TextEncoder::encode_vjp(std::size_t class_id, const ContextParams& ctx,
                               std::span<const double> upstream) const {
  return finite_diff_vjp(*this, class_id, ctx, upstream);
}

Matrix finite_diff_vjp(const TextEncoder& enc, std::size_t class_id, const ContextParams& ctx,
                       std::span<const double> upstream, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_vjp: step must be > 0");
  if (upstream.size() != enc.dim()) throw ShapeMismatch("finite_diff_vjp: upstream dimension");
  Matrix grad(ctx.learnable().rows(), ctx.learnable().cols());
  ContextParams probe = ctx;
  auto flat = probe.learnable().flat();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double saved = flat[k];
    flat[k] = saved + h;
    const double plus = dot(enc.encode(class_id, probe).values(), upstream);
    flat[k] = saved - h;
    const double minus = dot(enc.encode(class_id, probe).values(), upstream);
    flat[k] = saved;
    grad.flat()[k] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

std::vector<EmbeddingVector> encode_classes(const TextEncoder& enc,
                                            std::span<const std::size_t> class_ids,
                                            const ContextParams& ctx) {
  std::vector<EmbeddingVector> out;
  out.reserve(class_ids.size());
  for (std::size_t c : class_ids) out.push_back(enc.encode(c, ctx));
  return out;
}

namespace {

/// d<normalize(y), u>/dy = (u - tau <tau, u>) / ||y||.
Vector normalization_vjp(std::span<const double> y, std::span<const double> upstream) {
  const double n = norm(y);
  if (!(n > 0.0)) throw DegenerateInput("normalization of a zero vector");
  Vector tau(y.begin(), y.end());
  for (double& v : tau) v /= n;
  const double proj = dot(tau, upstream);
  Vector g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = (upstream[i] - tau[i] * proj) / n;
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

ToyVisualEncoder::ToyVisualEncoder(Matrix weights, Vector bias, std::size_t height,
                                   std::size_t width, PixelStandardization standardization)
    : weights_(std::move(weights)),
      bias_(std::move(bias)),
      height_(height),
      width_(width),
      standardization_(standardization) {
  if (height_ == 0 || width_ == 0) throw InvalidArgument("toy visual encoder: zero resolution");
  if (weights_.cols() != height_ * width_ * ImageTensor::channels) {
    throw ShapeMismatch("toy visual encoder: weight columns must equal H*W*3");
  }
  if (bias_.size() != weights_.rows()) throw ShapeMismatch("toy visual encoder: bias length");
}

ToyVisualEncoder ToyVisualEncoder::random(std::size_t height, std::size_t width, std::size_t dim,
                                          RngStream rng, double bias_scale) {
  const std::size_t inputs = height * width * ImageTensor::channels;
  Matrix w(dim, inputs);
  const double scale = 1.0 / std::sqrt(static_cast<double>(inputs));
  for (double& v : w.flat()) v = scale * rng.normal();
  Vector b(dim);
  for (double& v : b) v = bias_scale * rng.normal();
  return ToyVisualEncoder(std::move(w), std::move(b), height, width);
}

std::span<const double> ToyVisualEncoder::prepared(const ImageTensor& img,
                                                   ImageTensor& scratch) const {
  if (img.height != height_ || img.width != width_) {
    throw ShapeMismatch("toy visual encoder expects " + std::to_string(height_) + "x" +
                        std::to_string(width_) + " input, got " + std::to_string(img.height) +
                        "x" + std::to_string(img.width));
  }
  if (img.normalized) return img.values;
  scratch = standardize(img, standardization_);
  return scratch.values;
}

Vector ToyVisualEncoder::pre_normalization(const ImageTensor& img) const {
  ImageTensor scratch;
  const auto x = prepared(img, scratch);
  Vector y(bias_);
  for (std::size_t r = 0; r < weights_.rows(); ++r) {
    const auto w = weights_.row(r);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += w[k] * x[k];
    y[r] = s + bias_[r];
  }
  return y;
}

EmbeddingVector ToyVisualEncoder::encode(const ImageTensor& img) const {
  return EmbeddingVector::normalize(pre_normalization(img));
}

std::vector<EmbeddingVector> ToyVisualEncoder::encode_batch(std::span<const ImageTensor> imgs,
                                                            kernels::Exec exec) const {
  constexpr std::size_t kChunk = 64;
  std::vector<EmbeddingVector> out;
  out.reserve(imgs.size());
  const std::size_t inputs = weights_.cols();
  for (std::size_t begin = 0; begin < imgs.size(); begin += kChunk) {
    const std::size_t count = std::min(kChunk, imgs.size() - begin);
    Matrix batch(count, inputs);
    for (std::size_t i = 0; i < count; ++i) {
      ImageTensor scratch;
      const auto x = prepared(imgs[begin + i], scratch);
      std::copy(x.begin(), x.end(), batch.row(i).begin());
    }
    Matrix y;
    kernels::affine_forward(weights_, bias_, batch, y, exec);
    for (std::size_t i = 0; i < count; ++i) out.push_back(EmbeddingVector::normalize(y.row(i)));
  }
  return out;
}

// ---------------------------------------------------------------------------

Matrix class_pseudo_embeddings(std::span<const std::string> names, std::size_t class_dim) {
  std::unordered_map<std::uint64_t, std::size_t> hashes;
  Matrix m(names.size(), class_dim);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::uint64_t h = stable_hash(names[i]);
    const auto [it, inserted] = hashes.emplace(h, i);
    if (!inserted) {
      throw InvalidArgument("class names '" + names[it->second] + "' and '" + names[i] +
                            "' collide under the 64-bit class hash");
    }
    RngStream rng(h, stable_hash("class-embedding"));
    for (double& v : m.row(i)) v = rng.normal();
  }
  return m;
}

ToyTextEncoder::ToyTextEncoder(Matrix projection, Matrix class_embeddings, std::size_t token_dim)
    : projection_(std::move(projection)),
      class_embeddings_(std::move(class_embeddings)),
      token_dim_(token_dim) {
  if (projection_.cols() != token_dim_ + class_embeddings_.cols()) {
    throw ShapeMismatch("toy text encoder: projection must have token_dim + class_dim columns");
  }
  if (class_embeddings_.rows() == 0) throw InvalidArgument("toy text encoder: no classes");
}

ToyTextEncoder ToyTextEncoder::from_vocabulary(const ClassVocabulary& vocab, std::size_t dim,
                                               std::size_t token_dim, std::size_t class_dim,
                                               std::uint64_t seed) {
  vocab.validate();
  Matrix classes = class_pseudo_embeddings(vocab.names, class_dim);
  Matrix w(dim, token_dim + class_dim);
  RngStream rng = RngStream::derive(seed, 0, "toy-text-projection");
  const double scale = 1.0 / std::sqrt(static_cast<double>(token_dim + class_dim));
  for (double& v : w.flat()) v = scale * rng.normal();
  return ToyTextEncoder(std::move(w), std::move(classes), token_dim);
}

void ToyTextEncoder::check(std::size_t class_id, const ContextParams& ctx) const {
  if (class_id >= class_count()) throw InvalidArgument("unknown class id " + std::to_string(class_id));
  if (ctx.total_tokens() == 0) throw InvalidArgument("context has no tokens");
  if (ctx.token_dim() != token_dim_) throw ShapeMismatch("context token width mismatch");
}

Vector ToyTextEncoder::pre_normalization(std::size_t class_id, const ContextParams& ctx) const {
  check(class_id, ctx);
  Vector input(token_dim_ + class_embeddings_.cols(), 0.0);
  const double inv_t = 1.0 / static_cast<double>(ctx.total_tokens());
  for (std::size_t t = 0; t < ctx.total_tokens(); ++t) {
    const auto row = ctx.token(t);
    for (std::size_t k = 0; k < token_dim_; ++k) input[k] += row[k] * inv_t;
  }
  const auto e = class_embeddings_.row(class_id);
  std::copy(e.begin(), e.end(), input.begin() + static_cast<std::ptrdiff_t>(token_dim_));

  Vector y(projection_.rows());
  for (std::size_t r = 0; r < projection_.rows(); ++r) y[r] = dot(projection_.row(r), input);
  return y;
}

EmbeddingVector ToyTextEncoder::encode(std::size_t class_id, const ContextParams& ctx) const {
  return EmbeddingVector::normalize(pre_normalization(class_id, ctx));
}

Matrix ToyTextEncoder::encode_vjp(std::size_t class_id, const ContextParams& ctx,
                                  std::span<const double> upstream) const {
  if (upstream.size() != dim()) throw ShapeMismatch("toy text vjp: upstream dimension");
  const Vector y = pre_normalization(class_id, ctx);
  const Vector g = normalization_vjp(y, upstream);

  // d/d(mean token) = W_ctx^T g, shared by every token with weight 1/T.
  Vector d_mean(token_dim_, 0.0);
  for (std::size_t r = 0; r < projection_.rows(); ++r) {
    for (std::size_t k = 0; k < token_dim_; ++k) d_mean[k] += projection_(r, k) * g[r];
  }
  const double inv_t = 1.0 / static_cast<double>(ctx.total_tokens());
  Matrix grad(ctx.learnable().rows(), token_dim_);
  for (std::size_t t = 0; t < grad.rows(); ++t) {
    for (std::size_t k = 0; k < token_dim_; ++k) grad(t, k) = d_mean[k] * inv_t;
  }
  return grad;
}

// ---------------------------------------------------------------------------

AffineTextEncoder::AffineTextEncoder(Matrix offsets, std::vector<Matrix> jacobians,
                                     std::size_t token_dim)
    : offsets_(std::move(offsets)), jacobians_(std::move(jacobians)), token_dim_(token_dim) {
  if (offsets_.rows() == 0) throw InvalidArgument("affine text encoder: no classes");
  if (jacobians_.size() != offsets_.rows()) {
    throw ShapeMismatch("affine text encoder: one Jacobian per class required");
  }
  for (const Matrix& j : jacobians_) {
    if (j.rows() != offsets_.cols() || j.cols() != jacobians_.front().cols()) {
      throw ShapeMismatch("affine text encoder: Jacobian shape mismatch");
    }
  }
  if (token_dim_ == 0 || jacobians_.front().cols() % token_dim_ != 0) {
    throw ShapeMismatch("affine text encoder: parameter count must be a multiple of token_dim");
  }
}

std::size_t AffineTextEncoder::parameter_count() const noexcept { return jacobians_.front().cols(); }

void AffineTextEncoder::check(std::size_t class_id, const ContextParams& ctx) const {
  if (class_id >= class_count()) throw InvalidArgument("unknown class id " + std::to_string(class_id));
  if (ctx.parameter_count() != parameter_count() || ctx.learnable().cols() != token_dim_) {
    throw ShapeMismatch("affine text encoder: context shape mismatch");
  }
}

Vector AffineTextEncoder::pre_normalization(std::size_t class_id, const ContextParams& ctx) const {
  check(class_id, ctx);
  const Matrix& j = jacobians_[class_id];
  const auto delta = ctx.learnable().flat();
  Vector y(offsets_.row(class_id).begin(), offsets_.row(class_id).end());
  for (std::size_t r = 0; r < j.rows(); ++r) y[r] += dot(j.row(r), delta);
  return y;
}

EmbeddingVector AffineTextEncoder::encode(std::size_t class_id, const ContextParams& ctx) const {
  return EmbeddingVector::normalize(pre_normalization(class_id, ctx));
}

Matrix AffineTextEncoder::encode_vjp(std::size_t class_id, const ContextParams& ctx,
                                     std::span<const double> upstream) const {
  if (upstream.size() != dim()) throw ShapeMismatch("affine text vjp: upstream dimension");
  const Vector g = normalization_vjp(pre_normalization(class_id, ctx), upstream);
  const Matrix& j = jacobians_[class_id];
  Matrix grad(ctx.learnable().rows(), ctx.learnable().cols());
  auto flat = grad.flat();
  for (std::size_t r = 0; r < j.rows(); ++r) {
    const auto jr = j.row(r);
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] += jr[k] * g[r];
  }
  return grad;
}

}  // namespace fcl
