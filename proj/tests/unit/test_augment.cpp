#include "doctest.h"
#include "fcl/augment.hpp"
#include "fcl/error.hpp"
#include "helpers.hpp"

using namespace fcl;

TEST_CASE("view 0 is the resized original") {
  const ImageTensor img = test::random_image(30, 20, 1);
  AugmentConfig cfg;
  cfg.views = 6;
  cfg.output_size = 16;
  const ViewSet v = generate_views(img, cfg, RngStream(2, 3));
  CHECK(v.size() == 6);
  CHECK(v.crops[0] == CropRect{0, 0, 20, 30, false});
  CHECK(v.views[0] == resize_bilinear(img, 16, 16));
  for (const ImageTensor& view : v.views) {
    CHECK(view.height == 16);
    CHECK(view.width == 16);
  }
}

TEST_CASE("views do not depend on execution mode") {
  const ImageTensor img = test::random_image(25, 31, 2);
  AugmentConfig cfg;
  cfg.views = 24;
  cfg.output_size = 12;
  const RngStream rng = RngStream::derive(5, 7, "views");
  const ViewSet a = generate_views(img, cfg, rng, kernels::Exec::serial);
  const ViewSet b = generate_views(img, cfg, rng, kernels::Exec::parallel);
  CHECK(a.crops == b.crops);
  CHECK(a.views == b.views);
}

TEST_CASE("crops stay inside the image and respect the scale range") {
  AugmentConfig cfg;
  cfg.scale_min = 0.3;
  cfg.scale_max = 0.6;
  std::size_t flips = 0;
  for (std::uint64_t k = 0; k < 500; ++k) {
    RngStream rng(9, k);
    const CropRect c = sample_crop(40, 60, cfg, rng);
    CHECK(c.x + c.width <= 60);
    CHECK(c.y + c.height <= 40);
    CHECK(c.width >= 1);
    flips += c.flipped ? 1 : 0;
    if (c.width != 60 || c.height != 40) {
      const double frac = static_cast<double>(c.width * c.height) / 2400.0;
      CHECK(frac > 0.25);
      CHECK(frac < 0.66);
    }
  }
  CHECK(flips > 200);
  CHECK(flips < 300);
}

TEST_CASE("impossible crops fall back to the full frame") {
  AugmentConfig cfg;
  cfg.ratio_min = 50.0;
  cfg.ratio_max = 60.0;
  cfg.flip_probability = 0.0;
  RngStream rng(1, 1);
  CHECK(sample_crop(10, 10, cfg, rng) == CropRect{0, 0, 10, 10, false});
}

TEST_CASE("augment config validation names the field") {
  AugmentConfig cfg;
  cfg.views = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "$.augment.views");
  }
  CHECK_THROWS_AS(generate_views(ImageTensor(1, 1, 0.5), AugmentConfig{}, RngStream(1, 1)),
                  DegenerateInput);
}
