#include <fstream>

#include "doctest.h"
#include "fcl/config.hpp"
#include "fcl/error.hpp"
#include "helpers.hpp"

using namespace fcl;
using nlohmann::json;

namespace {

std::string error_path(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("an empty document yields the defaults") {
  const RunConfig c = parse_config(json::object());
  const EpisodeConfig& e = c.episode;
  CHECK(e.augment.views == 64);
  CHECK(e.encoder.beta == 20.0);
  CHECK(e.explore.rho == 0.3);
  CHECK(e.explore.top_k == 10);
  CHECK(e.explore.aggregation == Aggregation::voting);
  CHECK(e.evidence.masks == 400);
  CHECK(e.evidence.grid_sizes == std::vector<std::size_t>{7, 9, 11, 13});
  CHECK(e.context_tokens == 4);
  CHECK(e.context_init == "a photo of a");
  CHECK(e.calibrate.steps == 2);
  CHECK(e.calibrate.learning_rate == 0.002);
  CHECK(e.prompt_mode == PromptMode::context);
  CHECK(c.parallel == 1);
  CHECK_FALSE(c.dataset.has_value());
}

TEST_CASE("file values override defaults") {
  const RunConfig c = parse_config(json{{"evidence", {{"masks", 200}}}, {"explore", {{"aggregation", "mean"}}}});
  CHECK(c.episode.evidence.masks == 200);
  CHECK(c.episode.evidence.grid_sizes == std::vector<std::size_t>{7, 9, 11, 13});
  CHECK(c.episode.explore.aggregation == Aggregation::mean);
}

TEST_CASE("schema violations name the offending field") {
  CHECK(error_path(json{{"explore", {{"rho", 1.5}}}}) == "$.explore.rho");
  CHECK(error_path(json{{"explore", {{"rho", 0.0}}}}) == "$.explore.rho");
  CHECK(error_path(json{{"explore", {{"colour", 1}}}}) == "$.explore.colour");
  CHECK(error_path(json{{"bogus", true}}) == "$.bogus");
  CHECK(error_path(json{{"augment", {{"views", -3}}}}) == "$.augment.views");
  CHECK(error_path(json{{"evidence", {{"grid_sizes", {3, "x"}}}}}) == "$.evidence.grid_sizes[1]");
  CHECK(error_path(json{{"encoder", {{"backend", "graph"}}}}) == "$.graph.manifest");
  CHECK(error_path(json{{"parallel", 0}}) == "$.parallel");
  CHECK(error_path(json{{"dataset", {{"layout", "list"}, {"root", "x"}}}}) == "$.dataset.list");
  CHECK(error_path(json::array()) == "$");
}

TEST_CASE("relative paths resolve against the config directory") {
  const RunConfig c = parse_config(json{{"classes", "names.txt"}, {"dataset", {{"root", "imgs"}}}}, "/data/run");
  CHECK(c.classes == std::filesystem::path("/data/run/names.txt"));
  CHECK(c.dataset->root == std::filesystem::path("/data/run/imgs"));
}

TEST_CASE("config_to_json round trips") {
  RunConfig c = parse_config(json{{"seed", 17},
                                  {"explore", {{"top_k", 4}, {"aggregation", "mean"}}},
                                  {"context", {{"mode", "cl-hp"}, {"templates", {"a {}."}}}},
                                  {"dataset", {{"root", "/tmp/x"}, {"layout", "list"}, {"list", "/tmp/x/l.txt"}}}});
  const json doc = config_to_json(c);
  const RunConfig back = parse_config(doc);
  CHECK(config_to_json(back) == doc);
  CHECK(back.seed == 17);
  CHECK(back.episode.prompt_mode == PromptMode::hard_prompt_prefix);
  CHECK(back.episode.templates == std::vector<std::string>{"a {}."});
}

TEST_CASE("command-line overrides apply after the file") {
  const test::TempDir dir;
  {
    std::ofstream(dir / "t.txt") << "a photo of a {}.\n# comment\n\nart of the {}.\n";
  }
  RunConfig c = parse_config(json{{"evidence", {{"masks", 200}}}});
  ConfigOverrides o;
  o.masks = 50;
  o.rho = 0.5;
  o.parallel = 3;
  o.templates = dir / "t.txt";
  apply_overrides(c, o);
  CHECK(c.episode.evidence.masks == 50);
  CHECK(c.episode.explore.rho == 0.5);
  CHECK(c.parallel == 3);
  CHECK(c.episode.templates == std::vector<std::string>{"a photo of a {}.", "art of the {}."});
  o = {};
  o.rho = 2.0;
  CHECK_THROWS_AS(apply_overrides(c, o), ConfigError);
}

TEST_CASE("the bundled fixture config loads") {
  const RunConfig c = load_config(std::filesystem::path(FCL_FIXTURE_DIR) / "config.json");
  CHECK(c.episode.augment.views == 16);
  REQUIRE(c.dataset.has_value());
  CHECK(c.dataset->root == std::filesystem::path(FCL_FIXTURE_DIR) / "images");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("enum names") {
  CHECK(to_string(BackendKind::graph) == "graph");
  CHECK(parse_backend("toy") == BackendKind::toy);
  CHECK(parse_prompt_mode("cl-hp") == PromptMode::hard_prompt_prefix);
  CHECK_THROWS_AS(parse_prompt_mode("x"), ConfigError);
}
