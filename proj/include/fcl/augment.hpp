#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fcl/image.hpp"
#include "fcl/kernels.hpp"
#include "fcl/numerics.hpp"

namespace fcl {

struct AugmentConfig {
  std::size_t views = 64;
  double scale_min = 0.5;  ///< crop area as a fraction of the source area
  double scale_max = 1.0;
  double ratio_min = 3.0 / 4.0;
  double ratio_max = 4.0 / 3.0;
  double flip_probability = 0.5;
  std::size_t output_size = 224;
  std::size_t max_crop_attempts = 10;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Random-resized-crop geometry for a `height` × `width` source. Draws up to
/// `max_crop_attempts` (area, aspect) pairs and falls back to the full frame;
/// the flip flag is drawn last.
CropRect sample_crop(std::size_t height, std::size_t width, const AugmentConfig& cfg,
                     RngStream& rng);

struct ViewSet {
  std::vector<ImageTensor> views;
  std::vector<CropRect> crops;  ///< crops[0] is the full frame
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t size() const noexcept { return views.size(); }
};

/// View 0 is resize(x). View k ≥ 1 draws its crop from rng.fork(k), so the
/// result does not depend on generation order or thread count.
ViewSet generate_views(const ImageTensor& x, const AugmentConfig& cfg, const RngStream& rng,
                       kernels::Exec exec = kernels::default_exec());

}  // namespace fcl
