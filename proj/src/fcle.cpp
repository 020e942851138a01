#include "fcl/fcle.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "fcl/error.hpp"
#include "json.hpp"

namespace fcl {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'F', 'C', 'L', 'E'};

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

}  // namespace

std::span<const float> FcleTable::class_block(std::size_t c) const {
  if (c >= classes) throw InvalidArgument("FCLE: class index out of range");
  const std::size_t block = static_cast<std::size_t>(tokens_per_class) * token_dim;
  return std::span<const float>(data).subspan(c * block, block);
}

FcleTable parse_fcle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < FcleTable::header_bytes) throw IoError("FCLE: truncated header");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw IoError("FCLE: bad magic");
  FcleTable t;
  t.version = read_u32(bytes.data() + 4);
  t.classes = read_u32(bytes.data() + 8);
  t.tokens_per_class = read_u32(bytes.data() + 12);
  t.token_dim = read_u32(bytes.data() + 16);
  if (t.version != FcleTable::current_version) {
    throw IoError("FCLE: unsupported version " + std::to_string(t.version));
  }
  if (t.classes == 0 || t.tokens_per_class == 0 || t.token_dim == 0) {
    throw IoError("FCLE: zero dimension in header");
  }
  const std::size_t count = t.expected_size();
  const std::size_t payload = bytes.size() - FcleTable::header_bytes;
  if (payload != count * 4) {
    throw IoError("FCLE: payload has " + std::to_string(payload) + " bytes, header implies " +
                  std::to_string(count * 4));
  }
  t.data.resize(count);
  const std::uint8_t* p = bytes.data() + FcleTable::header_bytes;
  for (std::size_t i = 0; i < count; ++i) {
    t.data[i] = std::bit_cast<float>(read_u32(p + 4 * i));
    if (!std::isfinite(t.data[i])) throw IoError("FCLE: non-finite value at index " + std::to_string(i));
  }
  return t;
}

std::vector<std::uint8_t> serialize_fcle(const FcleTable& table) {
  if (table.data.size() != table.expected_size()) {
    throw InvalidArgument("FCLE: data size does not match the header dimensions");
  }
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(FcleTable::header_bytes + 4 * table.data.size());
  write_u32(out, table.version);
  write_u32(out, table.classes);
  write_u32(out, table.tokens_per_class);
  write_u32(out, table.token_dim);
  for (float v : table.data) write_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FcleTable read_fcle(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return parse_fcle(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_fcle(const std::filesystem::path& path, const FcleTable& table) {
  const auto bytes = serialize_fcle(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error("sha256: OpenSSL digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key, "required field is missing");
  return *it;
}

std::string get_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ConfigError(path + "." + key, "must be a string");
  return v.get<std::string>();
}

std::size_t get_size(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(path + "." + key, "must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::string> get_strings(const json& obj, const std::string& key,
                                     const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw ConfigError(path + "." + key, "must be an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) {
      throw ConfigError(path + "." + key + "[" + std::to_string(i) + "]", "must be a string");
    }
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

ExportArtifact get_artifact(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  const std::string p = path + "." + key;
  if (!v.is_object()) throw ConfigError(p, "must be an object");
  for (const auto& [k, _] : v.items()) {
    if (k != "path" && k != "sha256") throw ConfigError(p + "." + k, "unknown field");
  }
  ExportArtifact a{get_string(v, "path", p), get_string(v, "sha256", p)};
  if (a.sha256.size() != 64 ||
      a.sha256.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw ConfigError(p + ".sha256", "must be 64 lower-case hex digits");
  }
  return a;
}

json artifact_json(const ExportArtifact& a) { return json{{"path", a.path}, {"sha256", a.sha256}}; }

}  // namespace

ExportManifest parse_manifest(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("$", "manifest must be a JSON object");
  static const std::vector<std::string> known{
      "format", "source_model", "dim", "token_dim", "tokens_per_class", "context_tokens",
      "image_size", "classes", "templates", "artifacts", "extra"};
  for (const auto& [k, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("$." + k, "unknown field");
    }
  }
  ExportManifest m;
  const json& format = require(doc, "format", "$");
  if (!format.is_number_integer() || format.get<int>() != ExportManifest::current_format) {
    throw ConfigError("$.format", "unsupported manifest format");
  }
  m.source_model = get_string(doc, "source_model", "$");
  m.dim = get_size(doc, "dim", "$");
  m.token_dim = get_size(doc, "token_dim", "$");
  m.tokens_per_class = get_size(doc, "tokens_per_class", "$");
  m.context_tokens = get_size(doc, "context_tokens", "$");
  if (doc.contains("image_size")) m.image_size = get_size(doc, "image_size", "$");
  m.classes = get_strings(doc, "classes", "$");
  m.templates = get_strings(doc, "templates", "$");
  if (m.dim == 0) throw ConfigError("$.dim", "must be > 0");
  if (m.token_dim == 0) throw ConfigError("$.token_dim", "must be > 0");
  if (m.tokens_per_class == 0) throw ConfigError("$.tokens_per_class", "must be > 0");
  if (m.image_size == 0) throw ConfigError("$.image_size", "must be > 0");
  if (m.classes.empty()) throw ConfigError("$.classes", "must not be empty");

  const json& artifacts = require(doc, "artifacts", "$");
  if (!artifacts.is_object()) throw ConfigError("$.artifacts", "must be an object");
  for (const auto& [k, _] : artifacts.items()) {
    if (k != "vision_graph" && k != "text_graph" && k != "class_tokens" && k != "context_init") {
      throw ConfigError("$.artifacts." + k, "unknown artifact");
    }
  }
  m.vision_graph = get_artifact(artifacts, "vision_graph", "$.artifacts");
  m.text_graph = get_artifact(artifacts, "text_graph", "$.artifacts");
  m.class_tokens = get_artifact(artifacts, "class_tokens", "$.artifacts");
  if (artifacts.contains("context_init")) {
    m.context_init = get_artifact(artifacts, "context_init", "$.artifacts");
  }
  if (doc.contains("extra")) {
    const json& extra = doc["extra"];
    if (!extra.is_object()) throw ConfigError("$.extra", "must be an object");
    for (const auto& [k, v] : extra.items()) {
      if (!v.is_string()) throw ConfigError("$.extra." + k, "must be a string");
      m.extra[k] = v.get<std::string>();
    }
  }
  return m;
}

ExportManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()));
}

std::string manifest_to_json(const ExportManifest& m) {
  json artifacts{{"vision_graph", artifact_json(m.vision_graph)},
                 {"text_graph", artifact_json(m.text_graph)},
                 {"class_tokens", artifact_json(m.class_tokens)}};
  if (m.context_init) artifacts["context_init"] = artifact_json(*m.context_init);
  json doc{{"format", m.format},
           {"source_model", m.source_model},
           {"dim", m.dim},
           {"token_dim", m.token_dim},
           {"tokens_per_class", m.tokens_per_class},
           {"context_tokens", m.context_tokens},
           {"image_size", m.image_size},
           {"classes", m.classes},
           {"templates", m.templates},
           {"artifacts", artifacts}};
  if (!m.extra.empty()) doc["extra"] = m.extra;
  return doc.dump(2) + "\n";
}

std::filesystem::path resolve_artifact(const std::filesystem::path& manifest_dir,
                                       const ExportArtifact& artifact) {
  const std::filesystem::path p(artifact.path);
  return p.is_absolute() ? p : manifest_dir / p;
}

VerifiedExport verify_export(const std::filesystem::path& manifest_path) {
  VerifiedExport out;
  try {
    out.manifest = read_manifest(manifest_path);
  } catch (const Error& e) {
    throw BackendError(manifest_path.string() + ": " + e.what());
  }
  out.directory = manifest_path.parent_path();
  const ExportManifest& m = out.manifest;

  auto check = [&](const ExportArtifact& a, const char* name) {
    const auto path = resolve_artifact(out.directory, a);
    std::string actual;
    try {
      actual = sha256_file(path);
    } catch (const IoError& e) {
      throw BackendError(std::string(name) + ": " + e.what());
    }
    if (actual != a.sha256) {
      throw BackendError(std::string(name) + ": checksum mismatch for " + path.string() +
                         " (manifest " + a.sha256 + ", file " + actual + ")");
    }
    return path;
  };
  check(m.vision_graph, "vision_graph");
  check(m.text_graph, "text_graph");

  auto load = [](const std::filesystem::path& path, const char* name) {
    try {
      return read_fcle(path);
    } catch (const IoError& e) {
      throw BackendError(std::string(name) + ": " + e.what());
    }
  };
  out.class_tokens = load(check(m.class_tokens, "class_tokens"), "class_tokens");
  const FcleTable& t = out.class_tokens;
  if (t.classes != m.classes.size()) {
    throw BackendError("class_tokens: table has " + std::to_string(t.classes) +
                       " classes, manifest lists " + std::to_string(m.classes.size()));
  }
  if (t.tokens_per_class != m.tokens_per_class || t.token_dim != m.token_dim) {
    throw BackendError("class_tokens: table dimensions disagree with the manifest");
  }
  if (m.context_init) {
    out.context_init = load(check(*m.context_init, "context_init"), "context_init");
    const FcleTable& c = *out.context_init;
    if (c.classes != 1 || c.token_dim != m.token_dim || c.tokens_per_class != m.context_tokens) {
      throw BackendError("context_init: expected a 1 x context_tokens x token_dim table");
    }
  }
  return out;
}

}  // namespace fcl
