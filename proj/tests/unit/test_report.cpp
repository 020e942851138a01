#include <limits>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fcl/report.hpp"
#include "helpers.hpp"

using namespace fcl;

namespace {

EvaluationResult two_episodes() {
  EvaluationResult r;
  EpisodeReport b;
  b.image_id = "b,2.png";
  b.prediction = 1;
  b.zero_shot = 0;
  EpisodeReport a;
  a.image_id = "a.png";
  a.label = 1;
  a.prediction = 1;
  a.zero_shot = 0;
  a.ecec = 0.25;
  a.euec = -0.5;
  r.episodes = {b, a};
  r.skipped_ids = {"z.png", "c.png"};
  r.outcome = summarize(r.episodes, 2);
  return r;
}

}  // namespace

TEST_CASE("CSV rows are sorted, quoted, and leave missing values empty") {
  const ClassVocabulary vocab = test::vocabulary(2);
  const std::string csv = evaluation_csv(two_episodes(), vocab);
  CHECK(csv ==
        "image_id,zero_shot,fcl,correct,ecec,euec\n"
        "a.png,class0,class1,1,0.25,-0.5\n"
        "\"b,2.png\",class0,class1,,,\n");
}

TEST_CASE("JSON report uses nulls for missing values") {
  const ClassVocabulary vocab = test::vocabulary(2);
  const nlohmann::json doc = evaluation_report({{"seed", 1}}, two_episodes(), vocab);
  CHECK(doc["header"]["seed"] == 1);
  REQUIRE(doc["episodes"].size() == 2);
  CHECK(doc["episodes"][0]["image_id"] == "a.png");
  CHECK(doc["episodes"][0]["correct"] == true);
  CHECK(doc["episodes"][1]["label"].is_null());
  CHECK(doc["episodes"][1]["correct"].is_null());
  CHECK(doc["episodes"][1]["ecec"].is_null());
  CHECK(doc["skipped"] == nlohmann::json{"c.png", "z.png"});
  CHECK(doc["aggregate"]["accuracy"] == 1.0);
  CHECK(doc["aggregate"]["ecec_rank_test_p"].is_null());
  CHECK_FALSE(doc["episodes"][0].contains("wall_seconds"));
}

TEST_CASE("format_real is the shortest round-trip form") {
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_real(1e300) == "1e+300");
  CHECK(format_real(std::numeric_limits<double>::quiet_NaN()).empty());
}

TEST_CASE("write_text_file replaces the target atomically") {
  const test::TempDir dir;
  write_text_file(dir / "r.txt", "first");
  write_text_file(dir / "r.txt", "second");
  std::ifstream in(dir / "r.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "second");
  CHECK_FALSE(std::filesystem::exists(dir / "r.txt.tmp"));
}
