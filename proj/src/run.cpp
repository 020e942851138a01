#include "fcl/run.hpp"

#include "fcl/error.hpp"
#include "fcl/graph_backend.hpp"
#include "fcl/report.hpp"

namespace fcl {

LoadedModels load_models(const RunConfig& cfg) {
  cfg.validate();
  const EpisodeConfig& e = cfg.episode;
  LoadedModels out;
  if (e.encoder.backend == BackendKind::toy) {
    if (cfg.classes.empty()) throw ConfigError("$.classes", "the toy backend needs a class-name file");
    out.models.vocab = load_class_names(cfg.classes);
    const std::size_t size = e.augment.output_size;
    out.models.visual = std::make_shared<ToyVisualEncoder>(ToyVisualEncoder::random(
        size, size, e.encoder.dim, RngStream::derive(cfg.seed, 0, "toy-visual"), cfg.toy.bias_scale));
    out.models.text = std::make_shared<ToyTextEncoder>(ToyTextEncoder::from_vocabulary(
        out.models.vocab, e.encoder.dim, cfg.toy.token_dim, cfg.toy.class_dim, cfg.seed));
    out.bases = base_contexts(e, cfg.toy.token_dim, cfg.seed);
    return out;
  }

  GraphModels graph = load_graph_models(cfg.graph_manifest);
  out.models = std::move(graph.models);
  if (out.models.visual->dim() != e.encoder.dim) {
    throw ConfigError("$.encoder.dim", "export has d = " + std::to_string(out.models.visual->dim()));
  }
  if (out.models.visual->input_height() != e.augment.output_size) {
    throw ConfigError("$.augment.output_size",
                      "export expects " + std::to_string(out.models.visual->input_height()) + " pixels");
  }
  if (!e.templates.empty()) {
    throw ConfigError("$.context.templates", "prompt ensembles need the toy backend");
  }
  if (!graph.context_init) {
    throw ConfigError("$.graph.manifest", "export has no context_init table");
  }
  Matrix init = std::move(*graph.context_init);
  if (e.prompt_mode == PromptMode::context) {
    if (init.rows() != e.context_tokens) {
      throw ConfigError("$.context.tokens", "export has " + std::to_string(init.rows()) + " context tokens");
    }
    out.bases.emplace_back(std::move(init));
  } else {
    Matrix prefix(e.prefix_tokens, init.cols());
    RngStream rng = RngStream::derive(cfg.seed, 0, "clhp-prefix");
    for (double& v : prefix.flat()) v = 0.02 * rng.normal();
    out.bases.emplace_back(std::move(prefix), PromptMode::hard_prompt_prefix, std::move(init));
  }
  return out;
}

nlohmann::json report_header(const RunConfig& cfg) {
  nlohmann::json config = config_to_json(cfg);
  config.erase("parallel");
  config.erase("output");
  return {{"format", "fcl-report"},
          {"version", 1},
          {"seed", cfg.seed},
          {"backend", to_string(cfg.episode.encoder.backend)},
          {"config", config}};
}

EvaluationOutput run_evaluation(const RunConfig& cfg, const LoadedModels& loaded, WarningSink warn) {
  if (!cfg.dataset) throw ConfigError("$.dataset", "evaluation needs a dataset");
  EpisodeSource source =
      make_episode_source(scan_dataset(*cfg.dataset, loaded.models.vocab), std::move(warn));
  EvaluationOutput out;
  out.result = evaluate_dataset(source, cfg.episode, loaded.models, loaded.bases, cfg.seed, cfg.parallel);
  out.json = evaluation_report(report_header(cfg), out.result, loaded.models.vocab).dump(2) + "\n";
  out.csv = evaluation_csv(out.result, loaded.models.vocab);
  return out;
}

}  // namespace fcl
