#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fcl/encoders.hpp"
#include "fcl/image.hpp"
#include "fcl/kernels.hpp"
#include "fcl/numerics.hpp"

namespace fcl {

struct EvidenceConfig {
  std::size_t masks = 400;
  std::vector<std::size_t> grid_sizes{7, 9, 11, 13};
  double gamma = 0.5;

  void validate() const;
};

/// round(gamma * g²) clamped to [1, g² - 1].
std::size_t masked_cell_count(std::size_t grid, double gamma);

/// First row (or column) of block b when `extent` pixels are split into g
/// balanced contiguous blocks: floor(b * extent / g).
std::size_t block_start(std::size_t b, std::size_t extent, std::size_t grid);

struct MaskSpec {
  std::size_t grid = 0;
  std::vector<std::size_t> cells;     ///< occluded cell indices (row-major), ascending
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;   ///< height*width, 1 = occluded

  std::size_t occluded_pixels() const;
};

/// Rasterizes occluded `cells` of a g×g grid onto height×width pixels.
MaskSpec make_mask(std::size_t grid, std::vector<std::size_t> cells, std::size_t height,
                   std::size_t width);

/// Mask n draws its grid and cells from rng.fork(n).
std::vector<MaskSpec> sample_masks(const EvidenceConfig& cfg, std::size_t height,
                                   std::size_t width, const RngStream& rng);

/// Row-major concatenation of every mask's pixel map (N × H·W).
std::vector<std::uint8_t> pack_masks(std::span<const MaskSpec> masks);

/// Raw image with the mask's pixels set to black.
ImageTensor apply_occlusion(const ImageTensor& raw, const MaskSpec& mask);

struct EvidenceMap {
  std::size_t height = 0;
  std::size_t width = 0;
  Vector values;
};

/// Pixel-wise softmax of an EvidenceMap. Only spatial_softmax creates one.
class SpatialProbMap {
public:
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const double> values() const noexcept { return values_; }
  /// Log-probabilities; finite where values() has underflowed to zero.
  std::span<const double> log_values() const noexcept { return log_values_; }

private:
  friend SpatialProbMap spatial_softmax(const EvidenceMap& e);
  SpatialProbMap(std::size_t h, std::size_t w, Vector v, Vector logs)
      : height_(h), width_(w), values_(std::move(v)), log_values_(std::move(logs)) {}
  std::size_t height_;
  std::size_t width_;
  Vector values_;
  Vector log_values_;
};

/// Normalized product of two spatial maps for classes (first, second).
class CommonEvidenceMap {
public:
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t first() const noexcept { return first_; }
  std::size_t second() const noexcept { return second_; }

private:
  friend CommonEvidenceMap common_evidence_map(const SpatialProbMap&, const SpatialProbMap&,
                                               std::size_t, std::size_t);
  CommonEvidenceMap(std::size_t h, std::size_t w, Vector v, std::size_t i, std::size_t j)
      : height_(h), width_(w), values_(std::move(v)), first_(i), second_(j) {}
  std::size_t height_;
  std::size_t width_;
  Vector values_;
  std::size_t first_;
  std::size_t second_;
};

/// Occlusion probe for one image and one candidate set at the base context.
/// Caches the unoccluded log-posterior; each mask costs one forward pass and
/// yields Δℓ for every candidate at once.
class OcclusionProbe {
public:
  /// `image` is raw and already at the encoder's input resolution; `text`
  /// holds tau_c(δ0) for the candidates, one row each.
  OcclusionProbe(const VisualEncoder& encoder, ImageTensor image, Matrix text, double beta);

  const ImageTensor& image() const noexcept { return image_; }
  std::size_t candidates() const noexcept { return text_.rows(); }
  const Vector& base_log_posterior() const noexcept { return base_log_post_; }

  /// Δℓ_c = -log π(c | x with mask) + log π(c | x) for every candidate c.
  Vector delta_loss(const MaskSpec& mask) const;

  /// N_m × |C_K| matrix of Δℓ, masks encoded in batches.
  Matrix delta_losses(std::span<const MaskSpec> masks,
                      kernels::Exec exec = kernels::default_exec()) const;

private:
  Vector log_posterior(const EmbeddingVector& z) const;

  const VisualEncoder* encoder_;
  ImageTensor image_;
  Matrix text_;
  double beta_;
  Vector base_log_post_;
};

/// E(p) = (1/N) Σ_n coeffs[n] * M_n(p) over packed masks.
EvidenceMap class_evidence_map(std::span<const std::uint8_t> packed_masks,
                               std::span<const double> coeffs, std::size_t height,
                               std::size_t width, kernels::Exec exec = kernels::default_exec());

EvidenceMap class_evidence_map(std::span<const MaskSpec> masks, std::span<const double> coeffs,
                               kernels::Exec exec = kernels::default_exec());

SpatialProbMap spatial_softmax(const EvidenceMap& e);

CommonEvidenceMap common_evidence_map(const SpatialProbMap& s_i, const SpatialProbMap& s_j,
                                      std::size_t class_i, std::size_t class_j);

/// v / max(v). Throws DegenerateInput when max(v) <= 0.
Vector rescale_by_max(std::span<const double> v);

/// Pixel weights rescale(S)·(1 - rescale(Q)); when every weight is below
/// 1e-12 the weights fall back to rescale(S).
Vector unique_weights(const SpatialProbMap& s, const CommonEvidenceMap& q);

/// f_v(x ⊙ Q / max Q), weighting raw pixels.
EmbeddingVector common_evidence_embedding(const VisualEncoder& encoder, const ImageTensor& raw,
                                          const CommonEvidenceMap& q);

/// f_v(x ⊙ unique_weights(S_ŷ, Q_ŷy)).
EmbeddingVector unique_evidence_embedding(const VisualEncoder& encoder, const ImageTensor& raw,
                                          const SpatialProbMap& s_pred,
                                          const CommonEvidenceMap& q);

}  // namespace fcl
