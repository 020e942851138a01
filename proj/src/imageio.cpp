#include "fcl/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fcl/error.hpp"

namespace fcl {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageTensor decode_png(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw IoError(path.string() + ": empty PNG");
  }
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + msg);
  }
  ImageTensor out(image.height, image.width);
  std::transform(pixels.begin(), pixels.end(), out.values.begin(),
                 [](unsigned char v) { return static_cast<double>(v) / 255.0; });
  return out;
}

class PnmReader {
public:
  PnmReader(const std::filesystem::path& path, const std::vector<unsigned char>& bytes)
      : path_(path), bytes_(bytes) {}

  ImageTensor decode() {
    if (bytes_.size() < 2 || bytes_[0] != 'P') fail("not a PNM file");
    const char kind = static_cast<char>(bytes_[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') fail("unsupported PNM variant");
    pos_ = 2;
    const std::size_t width = number();
    const std::size_t height = number();
    const std::size_t maxval = number();
    if (width == 0 || height == 0) fail("zero dimension");
    if (maxval == 0 || maxval > 65535) fail("maxval out of range");
    const bool color = kind == '3' || kind == '6';
    const bool binary = kind == '5' || kind == '6';
    const std::size_t samples = width * height * (color ? 3 : 1);

    std::vector<std::size_t> raw(samples);
    if (binary) {
      ++pos_;  // single whitespace after maxval
      const std::size_t bytes_per = maxval > 255 ? 2 : 1;
      if (bytes_.size() - std::min(bytes_.size(), pos_) < samples * bytes_per) fail("truncated data");
      for (std::size_t i = 0; i < samples; ++i) {
        raw[i] = bytes_per == 1 ? bytes_[pos_ + i]
                                : (static_cast<std::size_t>(bytes_[pos_ + 2 * i]) << 8) |
                                      bytes_[pos_ + 2 * i + 1];
      }
    } else {
      for (std::size_t i = 0; i < samples; ++i) raw[i] = number();
    }

    ImageTensor out(height, width);
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t p = 0; p < width * height; ++p) {
      for (std::size_t c = 0; c < ImageTensor::channels; ++c) {
        const std::size_t v = raw[color ? 3 * p + c : p];
        if (v > maxval) fail("sample exceeds maxval");
        out.values[p * ImageTensor::channels + c] = static_cast<double>(v) * scale;
      }
    }
    return out;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const { throw IoError(path_.string() + ": " + msg); }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("malformed header or data");
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 30)) fail("number too large");
      ++pos_;
    }
    return v;
  }

  const std::filesystem::path& path_;
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> to_bytes(const ImageTensor& img) {
  if (img.normalized) throw InvalidArgument("image writers expect a raw image");
  std::vector<unsigned char> out(img.values.size());
  std::transform(img.values.begin(), img.values.end(), out.begin(), [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return out;
}

void write_png_buffer(const std::filesystem::path& path, const std::vector<unsigned char>& pixels,
                      std::size_t height, std::size_t width, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

}  // namespace

ImageTensor read_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  ImageTensor out;
  if (bytes.size() >= 8 && std::equal(std::begin(png_sig), std::end(png_sig), bytes.begin())) {
    out = decode_png(path, bytes);
  } else if (bytes.size() >= 2 && bytes[0] == 'P') {
    out = PnmReader(path, bytes).decode();
  } else {
    throw IoError(path.string() + ": unrecognized image format");
  }
  return out;
}

void write_png(const std::filesystem::path& path, const ImageTensor& img) {
  validate(img);
  write_png_buffer(path, to_bytes(img), img.height, img.width, PNG_FORMAT_RGB);
}

void write_ppm(const std::filesystem::path& path, const ImageTensor& img) {
  validate(img);
  const auto pixels = to_bytes(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_map_png(const std::filesystem::path& path, std::span<const double> values,
                   std::size_t height, std::size_t width) {
  if (values.size() != height * width || values.empty()) {
    throw ShapeMismatch("write_map_png: map size mismatch");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  std::vector<unsigned char> pixels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = range > 0.0 ? (values[i] - *lo) / range : 0.0;
    pixels[i] = static_cast<unsigned char>(std::lround(t * 255.0));
  }
  write_png_buffer(path, pixels, height, width, PNG_FORMAT_GRAY);
}

}  // namespace fcl
