#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fcl {

/// HWC-interleaved 3-channel image. Raw images hold values in [0,1];
/// `normalized` marks per-channel standardized values.
struct ImageTensor {
  static constexpr std::size_t channels = 3;

  ImageTensor() = default;
  ImageTensor(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w * channels, fill) {}

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  bool normalized = false;

  std::size_t pixel_count() const noexcept { return height * width; }
  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return values[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * width + x) * channels + c];
  }

  bool operator==(const ImageTensor&) const = default;
};

/// Throws InvalidArgument / NonFinite when dimensions are zero, the buffer
/// size is wrong, values are non-finite, or a raw image leaves [0,1].
void validate(const ImageTensor& img);

/// Integer crop rectangle inside a source image, plus horizontal flip flag.
struct CropRect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  bool flipped = false;

  bool operator==(const CropRect&) const = default;
};

/// Bilinear resample of `crop` (optionally mirrored) to out_h × out_w.
///
/// Half-pixel centers: output pixel (oy, ox) samples the source at
///   sy = crop.y + (oy + 0.5) * crop.height / out_h - 0.5
///   sx = crop.x + (ox + 0.5) * crop.width  / out_w - 0.5
/// clamped to the crop's pixel range, and interpolates as
/// a + t * (b - a) so constant regions stay exactly constant. With
/// `flipped`, output column ox reads the mirrored column out_w - 1 - ox.
ImageTensor crop_resize(const ImageTensor& src, const CropRect& crop, std::size_t out_h,
                        std::size_t out_w);

ImageTensor resize_bilinear(const ImageTensor& src, std::size_t out_h, std::size_t out_w);

/// Per-channel (x - mean) / std applied to a raw image.
struct PixelStandardization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};

  static PixelStandardization identity() { return {}; }
  /// CLIP preprocessing constants.
  static PixelStandardization clip() {
    return {{0.48145466, 0.4578275, 0.40821073}, {0.26862954, 0.26130258, 0.27577711}};
  }
};

ImageTensor standardize(const ImageTensor& raw, const PixelStandardization& s);

/// Multiplies every channel of pixel p by weights[p]. Works on raw images.
ImageTensor weight_pixels(const ImageTensor& img, std::span<const double> weights);

}  // namespace fcl
