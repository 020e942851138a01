#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include "fcl/image.hpp"

namespace fcl {

/// Decodes PNG (any bit depth or color type; alpha is composited onto black) or binary
/// and ASCII PNM (P2, P3, P5, P6) into a raw image in [0,1]. Grayscale is
/// replicated to three channels. Throws IoError on failure.
ImageTensor read_image(const std::filesystem::path& path);

/// 8-bit RGB PNG of a raw image; values are clamped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const ImageTensor& img);
/// Binary P6 with maxval 255.
void write_ppm(const std::filesystem::path& path, const ImageTensor& img);

/// Single-channel map (one value per pixel) rendered as an 8-bit grayscale
/// PNG, linearly rescaled from [min, max] to [0, 255].
void write_map_png(const std::filesystem::path& path, std::span<const double> values,
                   std::size_t height, std::size_t width);

}  // namespace fcl
