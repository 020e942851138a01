#include <fstream>

#include "doctest.h"
#include "fcl/dataset.hpp"
#include "fcl/error.hpp"
#include "fcl/imageio.hpp"
#include "helpers.hpp"

using namespace fcl;
namespace fs = std::filesystem;

namespace {

ClassVocabulary two_classes() {
  ClassVocabulary v;
  v.names = {"cat", "dog"};
  return v;
}

}  // namespace

TEST_CASE("read_lines trims and skips comments and blanks") {
  const test::TempDir dir;
  std::ofstream(dir / "l.txt") << "  cat \n# note\n\n\tdog\n";
  CHECK(read_lines(dir / "l.txt") == std::vector<std::string>{"cat", "dog"});
  CHECK(load_class_names(dir / "l.txt").names == std::vector<std::string>{"cat", "dog"});
  CHECK_THROWS_AS(read_lines(dir / "missing.txt"), IoError);
}

TEST_CASE("directory and list layouts give the same labelled entries") {
  const test::TempDir dir;
  fs::create_directories(dir / "cat");
  fs::create_directories(dir / "dog");
  write_png(dir / "cat" / "a.png", test::random_image(5, 5, 1));
  write_ppm(dir / "dog" / "b.ppm", test::random_image(5, 5, 2));
  std::ofstream(dir / "dog" / "notes.txt") << "not an image";

  DatasetManifest m;
  m.root = dir.path();
  const auto entries = scan_dataset(m, two_classes());
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].image_id == "cat/a.png");
  CHECK(entries[0].label == 0u);
  CHECK(entries[1].image_id == "dog/b.ppm");
  CHECK(entries[1].label == 1u);

  std::ofstream(dir / "list.txt") << "cat/a.png cat\ndog/b.ppm dog\n";
  DatasetManifest l;
  l.root = dir.path();
  l.layout = DatasetLayout::list_file;
  l.list = dir / "list.txt";
  const auto listed = scan_dataset(l, two_classes());
  REQUIRE(listed.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(listed[i].image_id == entries[i].image_id);
    CHECK(listed[i].label == entries[i].label);
    CHECK(listed[i].path == entries[i].path);
  }
}

TEST_CASE("list lines without a class are unlabelled; unknown classes are rejected") {
  const test::TempDir dir;
  write_png(dir / "x.png", test::random_image(4, 4, 1));
  std::ofstream(dir / "list.txt") << "x.png\n";
  DatasetManifest l;
  l.root = dir.path();
  l.layout = DatasetLayout::list_file;
  l.list = dir / "list.txt";
  const auto e = scan_dataset(l, two_classes());
  REQUIRE(e.size() == 1);
  CHECK_FALSE(e[0].label.has_value());

  std::ofstream(dir / "bad.txt") << "x.png horse\n";
  l.list = dir / "bad.txt";
  CHECK_THROWS_AS(scan_dataset(l, two_classes()), InvalidArgument);

  fs::create_directories(dir / "d" / "horse");
  DatasetManifest d;
  d.root = dir / "d";
  CHECK_THROWS_AS(scan_dataset(d, two_classes()), InvalidArgument);
  d.root = dir / "none";
  CHECK_THROWS_AS(scan_dataset(d, two_classes()), IoError);
}

TEST_CASE("a corrupt image is skipped with a warning") {
  const test::TempDir dir;
  fs::create_directories(dir / "cat");
  for (int i = 0; i < 4; ++i) {
    write_png(dir / "cat" / ("ok" + std::to_string(i) + ".png"), test::random_image(10, 10, i));
  }
  std::ofstream(dir / "cat" / "broken.png") << "definitely not a png";
  DatasetManifest m;
  m.root = dir.path();
  ClassVocabulary vocab;
  vocab.names = {"cat", "dog", "bird"};
  std::vector<std::string> warnings;
  const EpisodeSource src =
      make_episode_source(scan_dataset(m, vocab), [&](const std::string& w) { warnings.push_back(w); });
  REQUIRE(src.items.size() == 5);

  const auto models = test::toy_bundle(3, 8, 16, 1);
  const EvaluationResult r = evaluate_dataset(src, test::small_episode(8), models, 1, 1);
  CHECK(r.episodes.size() == 4);
  CHECK(r.skipped_ids == std::vector<std::string>{"cat/broken.png"});
  CHECK(r.outcome.skipped == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("broken.png") != std::string::npos);
}
