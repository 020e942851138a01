#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fcl {

/// Class-token embedding table. On disk, little-endian:
///   "FCLE" | u32 version | u32 classes | u32 tokens_per_class | u32 token_dim
/// followed by classes * tokens_per_class * token_dim f32 values, row-major.
struct FcleTable {
  static constexpr std::uint32_t current_version = 1;
  static constexpr std::size_t header_bytes = 20;

  std::uint32_t version = current_version;
  std::uint32_t classes = 0;
  std::uint32_t tokens_per_class = 0;
  std::uint32_t token_dim = 0;
  std::vector<float> data;

  std::size_t expected_size() const noexcept {
    return static_cast<std::size_t>(classes) * tokens_per_class * token_dim;
  }
  /// The tokens_per_class × token_dim block of class c.
  std::span<const float> class_block(std::size_t c) const;
};

/// Throws IoError on a bad magic, unsupported version, zero dimension,
/// truncated payload or trailing bytes.
FcleTable parse_fcle(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_fcle(const FcleTable& table);

FcleTable read_fcle(const std::filesystem::path& path);
void write_fcle(const std::filesystem::path& path, const FcleTable& table);

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct ExportArtifact {
  std::string path;    ///< relative to the manifest's directory unless absolute
  std::string sha256;
};

/// Description of an exported encoder pair, written next to the artifacts
/// as `manifest.json`.
struct ExportManifest {
  static constexpr int current_format = 1;

  int format = current_format;
  std::string source_model;
  std::size_t dim = 0;
  std::size_t token_dim = 0;
  std::size_t tokens_per_class = 0;
  std::size_t context_tokens = 0;
  std::size_t image_size = 224;
  std::vector<std::string> classes;
  std::vector<std::string> templates;
  ExportArtifact vision_graph;
  ExportArtifact text_graph;
  ExportArtifact class_tokens;                 ///< FCLE, one block per class
  std::optional<ExportArtifact> context_init;  ///< FCLE with C = 1: token embeddings of δ0
  std::map<std::string, std::string> extra;    ///< free-form string fields, echoed back
};

/// Throws ConfigError with a `$.`-path on schema violations, IoError on
/// unreadable files.
ExportManifest parse_manifest(const std::string& json_text);
ExportManifest read_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const ExportManifest& manifest);

std::filesystem::path resolve_artifact(const std::filesystem::path& manifest_dir,
                                       const ExportArtifact& artifact);

/// Tables referenced by a verified manifest.
struct VerifiedExport {
  ExportManifest manifest;
  std::filesystem::path directory;
  FcleTable class_tokens;
  std::optional<FcleTable> context_init;
};

/// Checks every artifact's checksum and that the FCLE headers agree with
/// the manifest's dimensions and class list. Throws BackendError on any
/// mismatch.
VerifiedExport verify_export(const std::filesystem::path& manifest_path);

}  // namespace fcl
