#include "fcl/config.hpp"

#include <fstream>
#include <set>

#include "fcl/error.hpp"

namespace fcl {

using nlohmann::json;

namespace {

/// Parsed text stores non-negative integers as unsigned; documents built in
/// code may hold them as signed.
bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

/// Reads fields of one JSON object and rejects the keys nobody asked for.
class ObjectReader {
public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "must be an object");
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void size(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!non_negative_integer(*v)) throw ConfigError(field(key), "must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!non_negative_integer(*v)) throw ConfigError(field(key), "must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "must be an integer");
      out = v->get<int>();
    }
  }

  void real(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "must be a number");
      out = v->get<double>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "must be true or false");
      out = v->get<bool>();
    }
  }

  bool string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "must be a string");
      out = v->get<std::string>();
      return true;
    }
    return false;
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    if (string(key, s)) {
      if (s.empty()) throw ConfigError(field(key), "must not be empty");
      const std::filesystem::path p(s);
      out = (p.is_absolute() || base.empty() ? p : base / p).lexically_normal();
    }
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "must be an array of strings");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_string()) {
          throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "must be a string");
        }
        out.push_back((*v)[i].get<std::string>());
      }
    }
  }

  void sizes(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "must be an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!non_negative_integer((*v)[i])) {
          throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "must be a non-negative integer");
        }
        out.push_back((*v)[i].get<std::size_t>());
      }
    }
  }

  template <typename F>
  void object(const std::string& key, F&& read) {
    if (const json* v = find(key)) {
      ObjectReader sub(*v, field(key));
      read(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [k, _] : obj_.items()) {
      if (!seen_.contains(k)) throw ConfigError(field(k), "unknown field");
    }
  }

private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Aggregation parse_aggregation(const std::string& s, const std::string& path) {
  if (s == "voting") return Aggregation::voting;
  if (s == "mean") return Aggregation::mean;
  throw ConfigError(path, "must be \"voting\" or \"mean\"");
}

DatasetLayout parse_layout(const std::string& s, const std::string& path) {
  if (s == "directory") return DatasetLayout::directory_per_class;
  if (s == "list") return DatasetLayout::list_file;
  throw ConfigError(path, "must be \"directory\" or \"list\"");
}

}  // namespace

std::string to_string(BackendKind kind) { return kind == BackendKind::toy ? "toy" : "graph"; }
std::string to_string(PromptMode mode) { return mode == PromptMode::context ? "cl" : "cl-hp"; }
std::string to_string(Aggregation a) { return a == Aggregation::voting ? "voting" : "mean"; }

BackendKind parse_backend(const std::string& s) {
  if (s == "toy") return BackendKind::toy;
  if (s == "graph") return BackendKind::graph;
  throw ConfigError("$.encoder.backend", "must be \"toy\" or \"graph\"");
}

PromptMode parse_prompt_mode(const std::string& s) {
  if (s == "cl") return PromptMode::context;
  if (s == "cl-hp") return PromptMode::hard_prompt_prefix;
  throw ConfigError("$.context.mode", "must be \"cl\" or \"cl-hp\"");
}

void RunConfig::validate() const {
  episode.validate();
  if (!(toy.bias_scale >= 0.0)) throw ConfigError("$.toy.bias_scale", "must be >= 0");
  if (toy.token_dim == 0) throw ConfigError("$.toy.token_dim", "must be > 0");
  if (toy.class_dim == 0) throw ConfigError("$.toy.class_dim", "must be > 0");
  if (parallel < 1) throw ConfigError("$.parallel", "must be >= 1");
  if (episode.encoder.backend == BackendKind::graph && graph_manifest.empty()) {
    throw ConfigError("$.graph.manifest", "required when encoder.backend is \"graph\"");
  }
  if (dataset && dataset->layout == DatasetLayout::list_file && dataset->list.empty()) {
    throw ConfigError("$.dataset.list", "required for the list layout");
  }
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  EpisodeConfig& e = cfg.episode;
  ObjectReader root(doc, "$");
  root.u64("seed", cfg.seed);
  root.integer("parallel", cfg.parallel);
  root.path("output", cfg.output, base_dir);
  root.path("classes", cfg.classes, base_dir);
  root.real("ecec_epsilon", e.ecec_epsilon);
  root.boolean("record_timing", e.record_timing);
  root.object("augment", [&](ObjectReader& r) {
    r.size("views", e.augment.views);
    r.real("scale_min", e.augment.scale_min);
    r.real("scale_max", e.augment.scale_max);
    r.real("ratio_min", e.augment.ratio_min);
    r.real("ratio_max", e.augment.ratio_max);
    r.real("flip_probability", e.augment.flip_probability);
    r.size("output_size", e.augment.output_size);
    r.size("max_crop_attempts", e.augment.max_crop_attempts);
  });
  root.object("explore", [&](ObjectReader& r) {
    r.real("rho", e.explore.rho);
    r.size("top_k", e.explore.top_k);
    std::string agg;
    if (r.string("aggregation", agg)) e.explore.aggregation = parse_aggregation(agg, r.field("aggregation"));
  });
  root.object("evidence", [&](ObjectReader& r) {
    r.size("masks", e.evidence.masks);
    r.sizes("grid_sizes", e.evidence.grid_sizes);
    r.real("gamma", e.evidence.gamma);
  });
  root.object("calibrate", [&](ObjectReader& r) {
    r.real("lambda_cal", e.calibrate.lambda_cal);
    r.real("lambda_align", e.calibrate.lambda_align);
    r.size("steps", e.calibrate.steps);
    r.real("learning_rate", e.calibrate.learning_rate);
    r.boolean("recompute_weights", e.calibrate.recompute_weights);
  });
  root.object("encoder", [&](ObjectReader& r) {
    r.real("beta", e.encoder.beta);
    r.size("dim", e.encoder.dim);
    std::string backend;
    if (r.string("backend", backend)) e.encoder.backend = parse_backend(backend);
  });
  root.object("context", [&](ObjectReader& r) {
    std::string mode;
    if (r.string("mode", mode)) e.prompt_mode = parse_prompt_mode(mode);
    r.string("init", e.context_init);
    r.size("tokens", e.context_tokens);
    r.size("prefix_tokens", e.prefix_tokens);
    r.strings("templates", e.templates);
  });
  root.object("toy", [&](ObjectReader& r) {
    r.size("token_dim", cfg.toy.token_dim);
    r.size("class_dim", cfg.toy.class_dim);
    r.real("bias_scale", cfg.toy.bias_scale);
  });
  root.object("graph", [&](ObjectReader& r) { r.path("manifest", cfg.graph_manifest, base_dir); });
  root.object("dataset", [&](ObjectReader& r) {
    DatasetManifest m;
    r.path("root", m.root, base_dir);
    std::string layout;
    if (r.string("layout", layout)) m.layout = parse_layout(layout, r.field("layout"));
    r.path("list", m.list, base_dir);
    if (m.root.empty()) throw ConfigError("$.dataset.root", "required field is missing");
    cfg.dataset = std::move(m);
  });
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

json config_to_json(const RunConfig& cfg) {
  const EpisodeConfig& e = cfg.episode;
  json doc{
      {"seed", cfg.seed},
      {"parallel", cfg.parallel},
      {"output", cfg.output.generic_string()},
      {"ecec_epsilon", e.ecec_epsilon},
      {"record_timing", e.record_timing},
      {"augment",
       {{"views", e.augment.views},
        {"scale_min", e.augment.scale_min},
        {"scale_max", e.augment.scale_max},
        {"ratio_min", e.augment.ratio_min},
        {"ratio_max", e.augment.ratio_max},
        {"flip_probability", e.augment.flip_probability},
        {"output_size", e.augment.output_size},
        {"max_crop_attempts", e.augment.max_crop_attempts}}},
      {"explore",
       {{"rho", e.explore.rho},
        {"top_k", e.explore.top_k},
        {"aggregation", to_string(e.explore.aggregation)}}},
      {"evidence",
       {{"masks", e.evidence.masks}, {"grid_sizes", e.evidence.grid_sizes}, {"gamma", e.evidence.gamma}}},
      {"calibrate",
       {{"lambda_cal", e.calibrate.lambda_cal},
        {"lambda_align", e.calibrate.lambda_align},
        {"steps", e.calibrate.steps},
        {"learning_rate", e.calibrate.learning_rate},
        {"recompute_weights", e.calibrate.recompute_weights}}},
      {"encoder",
       {{"beta", e.encoder.beta}, {"dim", e.encoder.dim}, {"backend", to_string(e.encoder.backend)}}},
      {"context",
       {{"mode", to_string(e.prompt_mode)},
        {"init", e.context_init},
        {"tokens", e.context_tokens},
        {"prefix_tokens", e.prefix_tokens},
        {"templates", e.templates}}},
      {"toy",
       {{"token_dim", cfg.toy.token_dim},
        {"class_dim", cfg.toy.class_dim},
        {"bias_scale", cfg.toy.bias_scale}}},
  };
  if (!cfg.classes.empty()) doc["classes"] = cfg.classes.generic_string();
  if (!cfg.graph_manifest.empty()) doc["graph"] = {{"manifest", cfg.graph_manifest.generic_string()}};
  if (cfg.dataset) {
    json d{{"root", cfg.dataset->root.generic_string()},
           {"layout", cfg.dataset->layout == DatasetLayout::directory_per_class ? "directory" : "list"}};
    if (!cfg.dataset->list.empty()) d["list"] = cfg.dataset->list.generic_string();
    doc["dataset"] = d;
  }
  return doc;
}

void apply_overrides(RunConfig& cfg, const ConfigOverrides& o) {
  EpisodeConfig& e = cfg.episode;
  if (o.seed) cfg.seed = *o.seed;
  if (o.backend) e.encoder.backend = *o.backend;
  if (o.views) e.augment.views = *o.views;
  if (o.rho) e.explore.rho = *o.rho;
  if (o.top_k) e.explore.top_k = *o.top_k;
  if (o.masks) e.evidence.masks = *o.masks;
  if (o.steps) e.calibrate.steps = *o.steps;
  if (o.output) cfg.output = *o.output;
  if (o.parallel) cfg.parallel = *o.parallel;
  if (o.prompt_mode) e.prompt_mode = *o.prompt_mode;
  if (o.templates) e.templates = read_lines(*o.templates);
  cfg.validate();
}

}  // namespace fcl
