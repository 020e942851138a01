#include "fcl/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fcl/error.hpp"

namespace fcl {

void validate(const ImageTensor& img) {
  if (img.height == 0 || img.width == 0) throw InvalidArgument("image has a zero dimension");
  if (img.values.size() != img.height * img.width * ImageTensor::channels) {
    throw InvalidArgument("image buffer size does not match its dimensions");
  }
  for (double v : img.values) {
    if (!std::isfinite(v)) throw NonFinite("image contains a non-finite value");
    if (!img.normalized && (v < 0.0 || v > 1.0)) {
      throw InvalidArgument("raw image value outside [0,1]: " + std::to_string(v));
    }
  }
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double t;
};

Tap make_tap(std::size_t origin, std::size_t extent, std::size_t out_extent, std::size_t o) {
  const double scale = static_cast<double>(extent) / static_cast<double>(out_extent);
  double s = static_cast<double>(origin) + (static_cast<double>(o) + 0.5) * scale - 0.5;
  const double first = static_cast<double>(origin);
  const double last = static_cast<double>(origin + extent - 1);
  s = std::clamp(s, first, last);
  const auto lo = static_cast<std::size_t>(std::floor(s));
  const std::size_t hi = std::min(lo + 1, origin + extent - 1);
  return {lo, hi, s - static_cast<double>(lo)};
}

double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

ImageTensor crop_resize(const ImageTensor& src, const CropRect& crop, std::size_t out_h,
                        std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("crop_resize: zero output size");
  if (crop.width == 0 || crop.height == 0 || crop.x + crop.width > src.width ||
      crop.y + crop.height > src.height) {
    throw InvalidArgument("crop_resize: crop rectangle outside the source image");
  }
  ImageTensor out(out_h, out_w);
  out.normalized = src.normalized;

  std::vector<Tap> xs(out_w);
  for (std::size_t ox = 0; ox < out_w; ++ox) xs[ox] = make_tap(crop.x, crop.width, out_w, ox);

  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const Tap ty = make_tap(crop.y, crop.height, out_h, oy);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const Tap& tx = xs[crop.flipped ? out_w - 1 - ox : ox];
      for (std::size_t c = 0; c < ImageTensor::channels; ++c) {
        const double top = lerp(src.at(ty.lo, tx.lo, c), src.at(ty.lo, tx.hi, c), tx.t);
        const double bottom = lerp(src.at(ty.hi, tx.lo, c), src.at(ty.hi, tx.hi, c), tx.t);
        out.at(oy, ox, c) = lerp(top, bottom, ty.t);
      }
    }
  }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& src, std::size_t out_h, std::size_t out_w) {
  if (src.height == out_h && src.width == out_w) return src;
  return crop_resize(src, CropRect{0, 0, src.width, src.height, false}, out_h, out_w);
}

ImageTensor standardize(const ImageTensor& raw, const PixelStandardization& s) {
  if (raw.normalized) throw InvalidArgument("standardize: image is already normalized");
  ImageTensor out = raw;
  for (std::size_t p = 0; p < raw.pixel_count(); ++p) {
    for (std::size_t c = 0; c < ImageTensor::channels; ++c) {
      double& v = out.values[p * ImageTensor::channels + c];
      v = (v - s.mean[c]) / s.stddev[c];
    }
  }
  out.normalized = true;
  return out;
}

ImageTensor weight_pixels(const ImageTensor& img, std::span<const double> weights) {
  if (weights.size() != img.pixel_count()) throw ShapeMismatch("weight_pixels: map size mismatch");
  ImageTensor out = img;
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (std::size_t c = 0; c < ImageTensor::channels; ++c) {
      out.values[p * ImageTensor::channels + c] *= weights[p];
    }
  }
  return out;
}

}  // namespace fcl
