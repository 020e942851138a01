#include "fcl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

#include "fcl/error.hpp"
#include "fcl/imageio.hpp"

namespace fcl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

std::size_t label_of(const ClassVocabulary& vocab, const std::string& name, const std::string& where) {
  const auto id = vocab.find(name);
  if (!id) throw InvalidArgument(where + ": class '" + name + "' is not in the vocabulary");
  return *id;
}

}  // namespace

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

ClassVocabulary load_class_names(const std::filesystem::path& path) {
  ClassVocabulary vocab;
  vocab.names = read_lines(path);
  vocab.validate();
  return vocab;
}

std::vector<DatasetEntry> scan_dataset(const DatasetManifest& manifest, const ClassVocabulary& vocab) {
  namespace fs = std::filesystem;
  std::vector<DatasetEntry> entries;
  if (manifest.layout == DatasetLayout::directory_per_class) {
    if (!fs::is_directory(manifest.root)) throw IoError("dataset root is not a directory: " + manifest.root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(manifest.root)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& dir : dirs) {
      const std::string name = dir.filename().string();
      const std::size_t label = label_of(vocab, name, dir.string());
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& f : files) {
        entries.push_back({name + "/" + f.filename().string(), f, label});
      }
    }
  } else {
    const auto lines = read_lines(manifest.list);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::istringstream fields(lines[i]);
      std::string rel;
      std::string cls;
      fields >> rel;
      std::getline(fields, cls);
      cls = trim(cls);
      const fs::path path = manifest.root / rel;
      if (!fs::exists(path)) throw IoError("listed image does not exist: " + path.string());
      DatasetEntry e{fs::path(rel).generic_string(), path, std::nullopt};
      if (!cls.empty()) {
        e.label = label_of(vocab, cls, manifest.list.string() + ":" + std::to_string(i + 1));
      }
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

EpisodeSource make_episode_source(std::vector<DatasetEntry> entries, WarningSink warn) {
  EpisodeSource source;
  auto shared = std::make_shared<const std::vector<DatasetEntry>>(std::move(entries));
  for (const DatasetEntry& e : *shared) source.items.push_back({e.image_id, e.label});
  source.load = [shared, warn = std::move(warn)](std::size_t i) -> std::optional<ImageTensor> {
    const DatasetEntry& e = shared->at(i);
    try {
      return read_image(e.path);
    } catch (const IoError& err) {
      if (warn) warn("skipping " + e.image_id + ": " + err.what());
      return std::nullopt;
    }
  };
  return source;
}

}  // namespace fcl
