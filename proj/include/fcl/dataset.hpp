#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fcl/encoders.hpp"
#include "fcl/pipeline.hpp"

namespace fcl {

enum class DatasetLayout {
  directory_per_class,  ///< root/<class-name>/<image>
  list_file,            ///< "<relative-path> <class-name>" per line
};

struct DatasetManifest {
  std::filesystem::path root;
  DatasetLayout layout = DatasetLayout::directory_per_class;
  std::filesystem::path list;     ///< list_file layout; relative paths resolve against root
  std::filesystem::path classes;  ///< one class name per line, order = class index
};

/// Non-empty, trimmed lines; '#' starts a comment line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

ClassVocabulary load_class_names(const std::filesystem::path& path);

struct DatasetEntry {
  std::string image_id;  ///< path relative to the root, '/'-separated
  std::filesystem::path path;
  std::optional<std::size_t> label;
};

/// Resolves the manifest into an ordered entry list. Directory layout sorts
/// class directories and files by name; list layout keeps file order. Throws
/// IoError for a missing file or directory and InvalidArgument for a class
/// name outside `vocab`. A list line with only a path has no label.
std::vector<DatasetEntry> scan_dataset(const DatasetManifest& manifest, const ClassVocabulary& vocab);

using WarningSink = std::function<void(const std::string&)>;

/// Lazy source over `entries`. Images that fail to decode are reported to
/// `warn` and yield nullopt, so evaluate_dataset counts them as skipped.
EpisodeSource make_episode_source(std::vector<DatasetEntry> entries, WarningSink warn);

}  // namespace fcl
