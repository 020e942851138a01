#include "fcl/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fcl/error.hpp"

namespace fcl {

void EvidenceConfig::validate() const {
  if (masks < 1) throw ConfigError("$.evidence.masks", "must be >= 1");
  if (grid_sizes.empty()) throw ConfigError("$.evidence.grid_sizes", "must not be empty");
  for (std::size_t g : grid_sizes) {
    if (g < 2) throw ConfigError("$.evidence.grid_sizes", "every grid size must be >= 2");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("$.evidence.gamma", "must lie in (0, 1)");
}

std::size_t masked_cell_count(std::size_t grid, double gamma) {
  const std::size_t cells = grid * grid;
  const auto k = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(cells)));
  return std::clamp<std::size_t>(k, 1, cells - 1);
}

std::size_t block_start(std::size_t b, std::size_t extent, std::size_t grid) {
  return b * extent / grid;
}

std::size_t MaskSpec::occluded_pixels() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

MaskSpec make_mask(std::size_t grid, std::vector<std::size_t> cells, std::size_t height,
                   std::size_t width) {
  if (grid == 0 || height == 0 || width == 0) throw InvalidArgument("make_mask: zero extent");
  MaskSpec m;
  m.grid = grid;
  m.height = height;
  m.width = width;
  m.pixels.assign(height * width, 0);
  std::sort(cells.begin(), cells.end());
  for (std::size_t cell : cells) {
    if (cell >= grid * grid) throw InvalidArgument("make_mask: cell index out of range");
    const std::size_t by = cell / grid;
    const std::size_t bx = cell % grid;
    for (std::size_t y = block_start(by, height, grid); y < block_start(by + 1, height, grid); ++y) {
      for (std::size_t x = block_start(bx, width, grid); x < block_start(bx + 1, width, grid); ++x) {
        m.pixels[y * width + x] = 1;
      }
    }
  }
  m.cells = std::move(cells);
  return m;
}

std::vector<MaskSpec> sample_masks(const EvidenceConfig& cfg, std::size_t height,
                                   std::size_t width, const RngStream& rng) {
  cfg.validate();
  std::vector<MaskSpec> masks;
  masks.reserve(cfg.masks);
  for (std::size_t n = 0; n < cfg.masks; ++n) {
    RngStream r = rng.fork(static_cast<std::uint64_t>(n));
    const std::size_t grid = cfg.grid_sizes[r.below(cfg.grid_sizes.size())];
    const std::size_t total = grid * grid;
    const std::size_t k = masked_cell_count(grid, cfg.gamma);
    // Partial Fisher–Yates: the first k entries are a uniform k-subset.
    std::vector<std::size_t> perm(total);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(r.below(total - i));
      std::swap(perm[i], perm[j]);
    }
    perm.resize(k);
    masks.push_back(make_mask(grid, std::move(perm), height, width));
  }
  return masks;
}

std::vector<std::uint8_t> pack_masks(std::span<const MaskSpec> masks) {
  if (masks.empty()) return {};
  const std::size_t pixels = masks.front().pixels.size();
  std::vector<std::uint8_t> packed;
  packed.reserve(masks.size() * pixels);
  for (const MaskSpec& m : masks) {
    if (m.pixels.size() != pixels) throw ShapeMismatch("pack_masks: masks differ in size");
    packed.insert(packed.end(), m.pixels.begin(), m.pixels.end());
  }
  return packed;
}

ImageTensor apply_occlusion(const ImageTensor& raw, const MaskSpec& mask) {
  if (raw.normalized) throw InvalidArgument("apply_occlusion: expects a raw image");
  if (mask.height != raw.height || mask.width != raw.width) {
    throw ShapeMismatch("apply_occlusion: mask and image sizes differ");
  }
  ImageTensor out = raw;
  for (std::size_t p = 0; p < mask.pixels.size(); ++p) {
    if (!mask.pixels[p]) continue;
    for (std::size_t c = 0; c < ImageTensor::channels; ++c) {
      out.values[p * ImageTensor::channels + c] = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

OcclusionProbe::OcclusionProbe(const VisualEncoder& encoder, ImageTensor image, Matrix text,
                               double beta)
    : encoder_(&encoder), image_(std::move(image)), text_(std::move(text)), beta_(beta) {
  if (image_.normalized) throw InvalidArgument("OcclusionProbe: expects a raw image");
  if (text_.rows() == 0) throw InvalidArgument("OcclusionProbe: empty candidate set");
  base_log_post_ = log_posterior(encoder_->encode(image_));
}

Vector OcclusionProbe::log_posterior(const EmbeddingVector& z) const {
  Vector scores(text_.rows());
  for (std::size_t c = 0; c < text_.rows(); ++c) scores[c] = beta_ * dot(z.values(), text_.row(c));
  return log_softmax(scores);
}

Vector OcclusionProbe::delta_loss(const MaskSpec& mask) const {
  const Vector lp = log_posterior(encoder_->encode(apply_occlusion(image_, mask)));
  Vector d(lp.size());
  for (std::size_t c = 0; c < lp.size(); ++c) d[c] = base_log_post_[c] - lp[c];
  return d;
}

Matrix OcclusionProbe::delta_losses(std::span<const MaskSpec> masks, kernels::Exec exec) const {
  constexpr std::size_t kBatch = 32;
  Matrix out(masks.size(), text_.rows());
  std::vector<ImageTensor> batch;
  for (std::size_t begin = 0; begin < masks.size(); begin += kBatch) {
    const std::size_t count = std::min(kBatch, masks.size() - begin);
    batch.clear();
    for (std::size_t i = 0; i < count; ++i) {
      batch.push_back(apply_occlusion(image_, masks[begin + i]));
    }
    const auto z = encoder_->encode_batch(batch, exec);
    for (std::size_t i = 0; i < count; ++i) {
      const Vector lp = log_posterior(z[i]);
      for (std::size_t c = 0; c < lp.size(); ++c) out(begin + i, c) = base_log_post_[c] - lp[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

EvidenceMap class_evidence_map(std::span<const std::uint8_t> packed_masks,
                               std::span<const double> coeffs, std::size_t height,
                               std::size_t width, kernels::Exec exec) {
  EvidenceMap e{height, width, Vector(height * width, 0.0)};
  kernels::weighted_mask_average(packed_masks, coeffs, height * width, e.values, exec);
  if (!all_finite(e.values)) throw NonFinite("class_evidence_map: non-finite evidence");
  return e;
}

EvidenceMap class_evidence_map(std::span<const MaskSpec> masks, std::span<const double> coeffs,
                               kernels::Exec exec) {
  if (masks.empty()) throw DegenerateInput("class_evidence_map: no masks");
  const std::vector<std::uint8_t> packed = pack_masks(masks);
  return class_evidence_map(packed, coeffs, masks.front().height, masks.front().width, exec);
}

SpatialProbMap spatial_softmax(const EvidenceMap& e) {
  if (e.values.size() != e.height * e.width || e.values.empty()) {
    throw ShapeMismatch("spatial_softmax: map size mismatch");
  }
  return SpatialProbMap(e.height, e.width, softmax(e.values).probs(), log_softmax(e.values));
}

CommonEvidenceMap common_evidence_map(const SpatialProbMap& s_i, const SpatialProbMap& s_j,
                                      std::size_t class_i, std::size_t class_j) {
  if (s_i.height() != s_j.height() || s_i.width() != s_j.width()) {
    throw ShapeMismatch("common_evidence_map: maps differ in size");
  }
  const auto a = s_i.values();
  const auto b = s_j.values();
  Vector q(a.size());
  for (std::size_t p = 0; p < q.size(); ++p) q[p] = a[p] * b[p];
  double total = 0.0;
  for (double v : q) total += v;
  if (!(total >= std::numeric_limits<double>::min())) {
    // Product underflowed; normalize in log space instead.
    const auto la = s_i.log_values();
    const auto lb = s_j.log_values();
    Vector logs(a.size());
    for (std::size_t p = 0; p < q.size(); ++p) logs[p] = la[p] + lb[p];
    q = softmax(logs).probs();
  } else {
    for (double& v : q) v /= total;
  }
  return CommonEvidenceMap(s_i.height(), s_i.width(), std::move(q), class_i, class_j);
}

Vector rescale_by_max(std::span<const double> v) {
  if (v.empty()) throw DegenerateInput("rescale_by_max: empty map");
  const double m = *std::max_element(v.begin(), v.end());
  if (!(m > 0.0)) throw DegenerateInput("rescale_by_max: maximum is not positive");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= m;
  return out;
}

Vector unique_weights(const SpatialProbMap& s, const CommonEvidenceMap& q) {
  if (s.height() != q.height() || s.width() != q.width()) {
    throw ShapeMismatch("unique_weights: maps differ in size");
  }
  const Vector rs = rescale_by_max(s.values());
  const Vector rq = rescale_by_max(q.values());
  Vector w(rs.size());
  double peak = 0.0;
  for (std::size_t p = 0; p < w.size(); ++p) {
    w[p] = rs[p] * (1.0 - rq[p]);
    peak = std::max(peak, w[p]);
  }
  if (peak < 1e-12) return rs;
  return w;
}

namespace {

void check_map_size(const ImageTensor& raw, std::size_t h, std::size_t w) {
  if (raw.height != h || raw.width != w) throw ShapeMismatch("evidence map and image sizes differ");
  if (raw.normalized) throw InvalidArgument("evidence weighting expects a raw image");
}

}  // namespace

EmbeddingVector common_evidence_embedding(const VisualEncoder& encoder, const ImageTensor& raw,
                                          const CommonEvidenceMap& q) {
  check_map_size(raw, q.height(), q.width());
  return encoder.encode(weight_pixels(raw, rescale_by_max(q.values())));
}

EmbeddingVector unique_evidence_embedding(const VisualEncoder& encoder, const ImageTensor& raw,
                                          const SpatialProbMap& s_pred,
                                          const CommonEvidenceMap& q) {
  check_map_size(raw, q.height(), q.width());
  return encoder.encode(weight_pixels(raw, unique_weights(s_pred, q)));
}

}  // namespace fcl
