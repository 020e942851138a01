#include <cmath>
#include "doctest.h"
#include "fcl/error.hpp"
#include "fcl/image.hpp"
#include "helpers.hpp"

using namespace fcl;

TEST_CASE("validate rejects malformed images") {
  ImageTensor ok(2, 3, 0.5);
  CHECK_NOTHROW(validate(ok));
  ImageTensor bad_size = ok;
  bad_size.values.pop_back();
  CHECK_THROWS(validate(bad_size));
  ImageTensor out_of_range = ok;
  out_of_range.values[0] = 1.5;
  CHECK_THROWS(validate(out_of_range));
  out_of_range.normalized = true;
  CHECK_NOTHROW(validate(out_of_range));
  ImageTensor nan_img = ok;
  nan_img.values[1] = NAN;
  CHECK_THROWS(validate(nan_img));
  CHECK_THROWS(validate(ImageTensor{}));
}

TEST_CASE("resize to the same size is the identity") {
  const ImageTensor img = test::random_image(7, 5, 1);
  CHECK(resize_bilinear(img, 7, 5) == img);
}

TEST_CASE("constant regions stay exactly constant under crop_resize") {
  const ImageTensor img(20, 30, 0.37);
  const ImageTensor out = crop_resize(img, {3, 4, 17, 11, true}, 9, 13);
  CHECK(out.height == 9);
  CHECK(out.width == 13);
  for (double v : out.values) CHECK(v == 0.37);
}

TEST_CASE("flipped crop mirrors the unflipped one") {
  const ImageTensor img = test::random_image(12, 16, 2);
  const CropRect crop{2, 1, 10, 9, false};
  CropRect mirrored = crop;
  mirrored.flipped = true;
  const ImageTensor a = crop_resize(img, crop, 8, 8);
  const ImageTensor b = crop_resize(img, mirrored, 8, 8);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(a.at(y, x, c) == b.at(y, 7 - x, c));
    }
  }
}

TEST_CASE("downsampling by two averages pixel pairs") {
  ImageTensor img(1, 4);
  const double v[4] = {0.0, 1.0, 0.2, 0.6};
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t c = 0; c < 3; ++c) img.at(0, x, c) = v[x];
  }
  const ImageTensor out = resize_bilinear(img, 1, 2);
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.5));
  CHECK(out.at(0, 1, 1) == doctest::Approx(0.4));
}

TEST_CASE("standardize and weight_pixels") {
  ImageTensor img(1, 2, 0.5);
  const ImageTensor s = standardize(img, {{0.5, 0.25, 0.0}, {1.0, 0.5, 2.0}});
  CHECK(s.normalized);
  CHECK(s.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(s.at(0, 0, 1) == doctest::Approx(0.5));
  CHECK(s.at(0, 1, 2) == doctest::Approx(0.25));
  const ImageTensor w = weight_pixels(img, std::vector<double>{0.0, 0.5});
  CHECK(w.at(0, 0, 1) == 0.0);
  CHECK(w.at(0, 1, 2) == doctest::Approx(0.25));
}
