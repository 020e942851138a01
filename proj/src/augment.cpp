#include "fcl/augment.hpp"

#include <cmath>

#include "fcl/error.hpp"

namespace fcl {

void AugmentConfig::validate() const {
  if (views < 1) throw ConfigError("$.augment.views", "must be >= 1");
  if (!(scale_min > 0.0) || !(scale_min <= scale_max) || !(scale_max <= 1.0)) {
    throw ConfigError("$.augment.scale", "need 0 < scale_min <= scale_max <= 1");
  }
  if (!(ratio_min > 0.0) || !(ratio_min <= ratio_max)) {
    throw ConfigError("$.augment.ratio", "need 0 < ratio_min <= ratio_max");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ConfigError("$.augment.flip_probability", "must lie in [0, 1]");
  }
  if (output_size < 1) throw ConfigError("$.augment.output_size", "must be >= 1");
}

CropRect sample_crop(std::size_t height, std::size_t width, const AugmentConfig& cfg,
                     RngStream& rng) {
  const double area = static_cast<double>(height) * static_cast<double>(width);
  CropRect crop{0, 0, width, height, false};
  for (std::size_t attempt = 0; attempt < cfg.max_crop_attempts; ++attempt) {
    const double target = area * rng.uniform(cfg.scale_min, cfg.scale_max);
    const double ratio = rng.uniform(cfg.ratio_min, cfg.ratio_max);
    const double w = std::round(std::sqrt(target * ratio));
    const double h = std::round(std::sqrt(target / ratio));
    if (w < 1.0 || h < 1.0 || w > static_cast<double>(width) || h > static_cast<double>(height)) {
      continue;
    }
    crop.width = static_cast<std::size_t>(w);
    crop.height = static_cast<std::size_t>(h);
    crop.x = static_cast<std::size_t>(rng.below(width - crop.width + 1));
    crop.y = static_cast<std::size_t>(rng.below(height - crop.height + 1));
    break;
  }
  crop.flipped = rng.bernoulli(cfg.flip_probability);
  return crop;
}

ViewSet generate_views(const ImageTensor& x, const AugmentConfig& cfg, const RngStream& rng,
                       kernels::Exec exec) {
  cfg.validate();
  validate(x);
  if (x.height * x.width < 2) throw DegenerateInput("generate_views: image must exceed 1x1");

  ViewSet set;
  set.seed = rng.seed();
  set.stream = rng.stream_id();
  set.views.resize(cfg.views);
  set.crops.resize(cfg.views);
  set.crops[0] = CropRect{0, 0, x.width, x.height, false};
  const std::size_t out = cfg.output_size;
  set.views[0] = resize_bilinear(x, out, out);

  auto make_view = [&](std::size_t k) {
    RngStream view_rng = rng.fork(static_cast<std::uint64_t>(k));
    set.crops[k] = sample_crop(x.height, x.width, cfg, view_rng);
    set.views[k] = crop_resize(x, set.crops[k], out, out);
  };
  const auto n = static_cast<std::ptrdiff_t>(cfg.views);
  if (exec == kernels::Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 1; k < n; ++k) make_view(static_cast<std::size_t>(k));
  } else {
    for (std::ptrdiff_t k = 1; k < n; ++k) make_view(static_cast<std::size_t>(k));
  }
  return set;
}

}  // namespace fcl
