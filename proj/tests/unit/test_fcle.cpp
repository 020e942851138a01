#include <fstream>

#include "doctest.h"
#include "fcl/error.hpp"
#include "fcl/fcle.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace fcl;

namespace {

FcleTable table(std::uint32_t classes, std::uint32_t tokens, std::uint32_t dim) {
  FcleTable t;
  t.classes = classes;
  t.tokens_per_class = tokens;
  t.token_dim = dim;
  for (std::size_t i = 0; i < t.expected_size(); ++i) t.data.push_back(0.25f * static_cast<float>(i) - 1.0f);
  return t;
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

/// An export directory with placeholder graphs and a matching manifest.
ExportManifest make_export(const test::TempDir& dir) {
  write_bytes(dir / "vision.onnx", "vision-graph");
  write_bytes(dir / "text.onnx", "text-graph");
  write_fcle(dir / "classes.fcle", table(2, 3, 4));
  write_fcle(dir / "context.fcle", table(1, 4, 4));
  ExportManifest m;
  m.source_model = "test";
  m.dim = 6;
  m.token_dim = 4;
  m.tokens_per_class = 3;
  m.context_tokens = 4;
  m.image_size = 8;
  m.classes = {"cat", "dog"};
  m.templates = {"a photo of a {}."};
  m.vision_graph = {"vision.onnx", sha256_file(dir / "vision.onnx")};
  m.text_graph = {"text.onnx", sha256_file(dir / "text.onnx")};
  m.class_tokens = {"classes.fcle", sha256_file(dir / "classes.fcle")};
  m.context_init = ExportArtifact{"context.fcle", sha256_file(dir / "context.fcle")};
  write_bytes(dir / "manifest.json", manifest_to_json(m));
  return m;
}

}  // namespace

TEST_CASE("FCLE round trip") {
  const FcleTable t = table(3, 2, 5);
  const auto bytes = serialize_fcle(t);
  CHECK(bytes.size() == FcleTable::header_bytes + 4 * t.expected_size());
  CHECK(bytes[0] == 'F');
  CHECK(bytes[3] == 'E');
  const FcleTable back = parse_fcle(bytes);
  CHECK(back.classes == 3);
  CHECK(back.tokens_per_class == 2);
  CHECK(back.token_dim == 5);
  CHECK(back.data == t.data);
  const auto block = back.class_block(1);
  CHECK(block.size() == 10);
  CHECK(block[0] == t.data[10]);
  CHECK_THROWS_AS(back.class_block(3), InvalidArgument);
}

TEST_CASE("FCLE rejects malformed input") {
  auto bytes = serialize_fcle(table(2, 2, 2));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_fcle(bad_magic), IoError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(parse_fcle(truncated), IoError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(parse_fcle(trailing), IoError);
  CHECK_THROWS_AS(parse_fcle(std::span(bytes).first(10)), IoError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(parse_fcle(version), IoError);
  FcleTable wrong = table(2, 2, 2);
  wrong.data.pop_back();
  CHECK_THROWS_AS(serialize_fcle(wrong), InvalidArgument);
}

TEST_CASE("sha256 of known inputs") {
  CHECK(sha256_hex({}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  CHECK(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest round trip and schema errors") {
  const test::TempDir dir;
  const ExportManifest m = make_export(dir);
  const ExportManifest back = parse_manifest(manifest_to_json(m));
  CHECK(back.classes == m.classes);
  CHECK(back.dim == 6);
  CHECK(back.context_init->path == "context.fcle");

  auto doc = nlohmann::json::parse(manifest_to_json(m));
  auto expect_path = [](const nlohmann::json& d, const std::string& path) {
    try {
      parse_manifest(d.dump());
      FAIL("accepted an invalid manifest");
    } catch (const ConfigError& e) {
      CHECK(e.path() == path);
    }
  };
  auto unknown = doc;
  unknown["colour"] = "red";
  expect_path(unknown, "$.colour");
  auto sha = doc;
  sha["artifacts"]["text_graph"]["sha256"] = "ABC";
  expect_path(sha, "$.artifacts.text_graph.sha256");
  auto missing = doc;
  missing.erase("dim");
  expect_path(missing, "$.dim");
  auto extra = doc;
  extra["artifacts"]["weights"] = doc["artifacts"]["text_graph"];
  expect_path(extra, "$.artifacts.weights");
}

TEST_CASE("verify_export accepts a consistent export and flags tampering") {
  const test::TempDir dir;
  make_export(dir);
  const VerifiedExport v = verify_export(dir / "manifest.json");
  CHECK(v.class_tokens.classes == 2);
  REQUIRE(v.context_init.has_value());
  CHECK(v.context_init->tokens_per_class == 4);
  CHECK(resolve_artifact(v.directory, v.manifest.vision_graph) == v.directory / "vision.onnx");

  write_bytes(dir / "text.onnx", "tampered");
  CHECK_THROWS_AS(verify_export(dir / "manifest.json"), BackendError);
}

TEST_CASE("verify_export checks table dimensions against the manifest") {
  const test::TempDir dir;
  ExportManifest m = make_export(dir);
  m.classes.push_back("bird");
  write_bytes(dir / "manifest.json", manifest_to_json(m));
  CHECK_THROWS_AS(verify_export(dir / "manifest.json"), BackendError);
}
