#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "fcl/encoders.hpp"
#include "fcl/image.hpp"
#include "fcl/numerics.hpp"
#include "fcl/pipeline.hpp"

namespace fcl::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fcl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline ImageTensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  RngStream rng(seed, 99);
  ImageTensor img(h, w);
  for (double& v : img.values) v = rng.uniform();
  return img;
}

inline ClassVocabulary vocabulary(std::size_t n) {
  ClassVocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.names.push_back("class" + std::to_string(i));
  return v;
}

/// Toy encoders over a small vocabulary at `size` × `size` input.
inline ModelBundle toy_bundle(std::size_t classes, std::size_t size, std::size_t dim,
                              std::uint64_t seed) {
  ModelBundle b;
  b.vocab = vocabulary(classes);
  b.visual = std::make_shared<ToyVisualEncoder>(
      ToyVisualEncoder::random(size, size, dim, RngStream::derive(seed, 0, "toy-visual")));
  b.text = std::make_shared<ToyTextEncoder>(ToyTextEncoder::from_vocabulary(b.vocab, dim, 8, 8, seed));
  return b;
}

inline EpisodeConfig small_episode(std::size_t size) {
  EpisodeConfig c;
  c.augment.views = 8;
  c.augment.output_size = size;
  c.explore.top_k = 3;
  c.evidence.masks = 24;
  c.evidence.grid_sizes = {2, 3, 4};
  c.encoder.dim = 16;
  return c;
}

}  // namespace fcl::test
