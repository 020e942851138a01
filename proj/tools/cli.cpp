#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>

#include "CLI11.hpp"
#include "fcl/config.hpp"
#include "fcl/error.hpp"
#include "fcl/imageio.hpp"
#include "fcl/report.hpp"
#include "fcl/run.hpp"
#include "fcl/theorylab.hpp"
#include "json.hpp"
#include "suites.hpp"

#ifndef FCL_FIXTURE_CONFIG
#define FCL_FIXTURE_CONFIG "data/toy10/config.json"
#endif

namespace fcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::filesystem::path default_fixture() { return FCL_FIXTURE_CONFIG; }

namespace {

/// Warnings may arrive from concurrent episodes; one writer at a time.
class SerializedSink {
public:
  explicit SerializedSink(std::ostream& err) : err_(&err) {}

  WarningSink sink() {
    return [this](const std::string& msg) {
      std::lock_guard<std::mutex> lock(mu_);
      *err_ << "warning: " << msg << '\n';
    };
  }

private:
  std::ostream* err_;
  std::mutex mu_;
};

struct RunFlags {
  std::string config;
  ConfigOverrides overrides;
  std::string backend;
  std::string prompt_mode;
  std::string templates;
  std::string output;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool config_required) {
  auto* config = cmd->add_option("--config", f.config, "run config (JSON)");
  if (config_required) config->required();
  cmd->add_option("--seed", f.overrides.seed, "global seed");
  cmd->add_option("--backend", f.backend, "encoder backend")->check(CLI::IsMember({"toy", "graph"}));
  cmd->add_option("--views", f.overrides.views, "augmented views N");
  cmd->add_option("--rho", f.overrides.rho, "retained view fraction");
  cmd->add_option("--topk", f.overrides.top_k, "candidate count K");
  cmd->add_option("--masks", f.overrides.masks, "occlusion masks");
  cmd->add_option("--steps", f.overrides.steps, "calibration steps");
  cmd->add_option("--out", f.output, "output directory");
  cmd->add_option("--parallel", f.overrides.parallel, "concurrent episodes");
  cmd->add_option("--prompt-mode", f.prompt_mode, "cl or cl-hp")->check(CLI::IsMember({"cl", "cl-hp"}));
  cmd->add_option("--templates", f.templates, "template file, one per line");
}

RunConfig resolve_config(RunFlags& f) {
  RunConfig cfg = f.config.empty() ? parse_config(json::object(), fs::current_path())
                                   : load_config(f.config);
  if (!f.backend.empty()) f.overrides.backend = parse_backend(f.backend);
  if (!f.prompt_mode.empty()) f.overrides.prompt_mode = parse_prompt_mode(f.prompt_mode);
  if (!f.templates.empty()) f.overrides.templates = f.templates;
  if (!f.output.empty()) f.overrides.output = f.output;
  apply_overrides(cfg, f.overrides);
  return cfg;
}

std::optional<std::size_t> parse_label(const std::string& label, const ClassVocabulary& vocab) {
  if (label.empty()) return std::nullopt;
  const auto id = vocab.find(label);
  if (!id) throw InvalidArgument("--label: unknown class '" + label + "'");
  return id;
}

EpisodeReport predict_one(const RunConfig& cfg, const LoadedModels& loaded, const ImageTensor& image,
                          std::optional<std::size_t> label, const std::string& image_id) {
  const RngStream rng = RngStream::derive(cfg.seed, 0, "episode");
  EpisodeReport r = loaded.bases.size() > 1
                        ? prompt_ensemble_predict(image, label, cfg.episode, loaded.models, loaded.bases, rng)
                        : run_episode(image, label, cfg.episode, loaded.models, loaded.bases.front(), rng);
  r.image_id = image_id;
  return r;
}

int cmd_predict(RunFlags& f, const std::string& image_path, const std::string& label,
                std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedModels loaded = load_models(cfg);
  const ImageTensor image = read_image(image_path);
  const EpisodeReport r =
      predict_one(cfg, loaded, image, parse_label(label, loaded.models.vocab), fs::path(image_path).filename().string());
  const json doc{{"header", report_header(cfg)}, {"episode", episode_to_json(r, loaded.models.vocab)}};
  out << doc.dump(2) << '\n';
  return ok;
}

int cmd_evaluate(RunFlags& f, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(f);
  const LoadedModels loaded = load_models(cfg);
  SerializedSink warnings(err);
  const EvaluationOutput result = run_evaluation(cfg, loaded, warnings.sink());
  fs::create_directories(cfg.output);
  write_text_file(cfg.output / "report.json", result.json);
  write_text_file(cfg.output / "report.csv", result.csv);
  const PredictionOutcome& o = result.result.outcome;
  out << "episodes " << o.episodes << ", skipped " << o.skipped << ", accuracy "
      << format_real(o.accuracy) << ", zero-shot accuracy " << format_real(o.zero_shot_accuracy)
      << "\nwrote " << (cfg.output / "report.json").string() << " and "
      << (cfg.output / "report.csv").string() << '\n';
  return ok;
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

/// Candidates and evidence maps of episode 0 for one image, at δ0 of the
/// first template.
int cmd_evidence(RunFlags& f, const std::string& image_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedModels loaded = load_models(cfg);
  const EpisodeConfig& e = cfg.episode;
  const VisualEncoder& visual = *loaded.models.visual;
  const TextEncoder& text = *loaded.models.text;
  const ClassVocabulary& vocab = loaded.models.vocab;
  const ImageTensor image = read_image(image_path);

  const RngStream rng = RngStream::derive(cfg.seed, 0, "episode");
  const ViewSet views = generate_views(image, e.augment, rng.fork("views"));
  const Matrix z = stack_rows(visual.encode_batch(views.views, kernels::default_exec()));
  std::vector<std::size_t> all(text.class_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const ContextParams& base = loaded.bases.front();
  const ScoreMatrix full = score_views(z, text, all, base, e.encoder.beta);
  const CandidateSet candidates = explore_topk(full, e.explore);
  const std::vector<std::size_t>& ck = candidates.class_ids;
  const Matrix ck_text = stack_rows(encode_classes(text, ck, base));
  const EvidenceBundle ev = compute_evidence(visual, views.views[0], ck_text, ck, e.encoder.beta,
                                             e.evidence, rng.fork("masks"));

  fs::create_directories(cfg.output);
  json maps = json::array();
  for (std::size_t a = 0; a < ck.size(); ++a) {
    const std::string file = "S_" + std::to_string(a) + "_" + file_safe(vocab.names[ck[a]]) + ".png";
    write_map_png(cfg.output / file, ev.spatial[a].values(), ev.spatial[a].height(), ev.spatial[a].width());
    maps.push_back({{"kind", "spatial"}, {"classes", {vocab.names[ck[a]]}}, {"file", file}});
  }
  for (std::size_t a = 0; a < ck.size(); ++a) {
    for (std::size_t b = a + 1; b < ck.size(); ++b) {
      const CommonEvidenceMap& q = ev.common[ev.pair_index(a, b)];
      const std::string file = "Q_" + std::to_string(a) + "_" + std::to_string(b) + ".png";
      write_map_png(cfg.output / file, q.values(), q.height(), q.width());
      maps.push_back({{"kind", "common"}, {"classes", {vocab.names[ck[a]], vocab.names[ck[b]]}},
                      {"file", file}});
    }
  }
  write_png(cfg.output / "input.png", views.views[0]);
  const json doc{{"header", report_header(cfg)},
                 {"image", fs::path(image_path).filename().string()},
                 {"candidates", ck},
                 {"maps", maps}};
  write_text_file(cfg.output / "evidence.json", doc.dump(2) + "\n");
  out << "wrote " << maps.size() << " maps to " << cfg.output.string() << '\n';
  return ok;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_theory(const std::string& experiment, std::uint64_t seed, std::ostream& out) {
  using namespace fcl::theory;
  json doc;
  if (experiment == "bound") {
    const checks::SuiteResult r = checks::bound_suite(seed);
    out << checks::format_result(r) << '\n';
    return r.passed ? ok : runtime_failure;
  }
  if (experiment == "margin") {
    FailureSpec spec = FailureSpec::biased();
    spec.world.seed = seed;
    const SyntheticWorld world(spec.world);
    SyntheticView view;
    view.a_common = 0.9;
    view.a_unique.assign(world.classes(), 0.0);
    view.a_unique[0] = 0.4;
    view.noise.assign(world.dim(), 0.0);
    const MarginBreakdown m = margin_breakdown(view, world, world.base_context(), 0);
    json competitors = json::array();
    for (const CompetitorTerms& c : m.competitors) {
      competitors.push_back({{"class", c.competitor},
                             {"common_bias", c.common_bias},
                             {"competitor_unique", c.competitor_unique},
                             {"residual", c.residual}});
    }
    doc = {{"true_class", 0},
           {"unique_term", m.unique_term},
           {"competitors", competitors},
           {"argmax_competitor", m.argmax_competitor},
           {"recombined", m.recombined},
           {"direct", m.direct},
           {"normalized", m.normalized},
           {"softmax_lower_bound", softmax_lower_bound(m.normalized, world.classes())}};
  } else if (experiment == "failure-modes") {
    FailureSpec spec = FailureSpec::biased();
    spec.seed = seed;
    const FailureReport r = run_failure_mode_experiments(spec);
    doc = {{"trials", r.trials.size()},         {"amplified", r.amplified()},
           {"vote_wrong", r.vote_wrong()},      {"fcl_flipped", r.fcl_flipped()},
           {"oracle_flipped", r.oracle_flipped()}, {"cal_decreased", r.cal_decreased()},
           {"gap_decreased", r.gap_decreased()}};
  } else if (experiment == "euec-corr") {
    CorrelationSpec cs;
    cs.seed = seed;
    cs.world.dim = 32;
    cs.world.classes = 4;
    cs.world.common_alignment = {0.4, 0.4, 0.4, 0.4};
    cs.world.self_alignment = {0.7, 0.7, 0.7, 0.7};
    const CorrelationResult swept = euec_entropy_correlation(cs);
    cs.mode = CorrelationMode::null;
    const CorrelationResult null_model = euec_entropy_correlation(cs);
    doc = {{"swept", {{"pearson", optional_json(swept.pearson)}, {"spearman", optional_json(swept.spearman)}}},
           {"null", {{"pearson", optional_json(null_model.pearson)},
                     {"spearman", optional_json(null_model.spearman)}}}};
  } else if (experiment == "proxy") {
    ProxySpec ps;
    ps.seed = seed;
    const ProxyResult r = proxy_reconstruction(ToyImageWorld(default_image_spec()), ps);
    doc = {{"instances", r.instances}, {"holds", r.holds}, {"mean_cos_sum", mean(r.cos_sum)},
           {"mean_cos_best_component", mean(r.cos_best_component)}};
  } else if (experiment == "trend") {
    TrendSpec ts;
    ts.seed = seed;
    const EvaluationResult r = ecec_trend(ToyImageWorld(default_image_spec()), ts);
    doc = outcome_to_json(r.outcome);
  }
  out << doc.dump(2) << '\n';
  return ok;
}

int cmd_selftest(const std::string& fixture, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<checks::SuiteResult> results = checks::run_all(
      fixture.empty() ? default_fixture() : fs::path(fixture),
      [&](const checks::SuiteResult& r) { out << checks::format_result(r) << std::endl; });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  out << (failed == 0 ? "selftest passed" : "selftest FAILED") << " (" << results.size() - failed << "/"
      << results.size() << " suites, " << seconds << " s)" << std::endl;
  return failed == 0 ? ok : runtime_failure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Test-time prompt calibration engine", "fcl"};
  app.require_subcommand(1);

  RunFlags flags;
  std::string image;
  std::string label;
  std::string experiment;
  std::string fixture;
  std::uint64_t theory_seed = 7;

  CLI::App* predict = app.add_subcommand("predict", "run one episode and print its report");
  add_run_flags(predict, flags, true);
  predict->add_option("--image", image, "input image (PNG or PNM)")->required();
  predict->add_option("--label", label, "true class name");

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a dataset, writing JSON and CSV reports");
  add_run_flags(evaluate, flags, true);

  CLI::App* evidence = app.add_subcommand("evidence", "dump evidence maps for one image");
  add_run_flags(evidence, flags, true);
  evidence->add_option("--image", image, "input image (PNG or PNM)")->required();

  CLI::App* theory = app.add_subcommand("theory-lab", "synthetic-world experiments");
  theory->add_option("experiment", experiment, "experiment")
      ->required()
      ->check(CLI::IsMember({"bound", "margin", "failure-modes", "euec-corr", "proxy", "trend"}));
  theory->add_option("--seed", theory_seed, "experiment seed");

  CLI::App* selftest = app.add_subcommand("selftest", "run the embedded property suites");
  selftest->add_option("--fixture", fixture, "fixture config for the determinism suite");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (predict->parsed()) return cmd_predict(flags, image, label, out);
    if (evaluate->parsed()) return cmd_evaluate(flags, out, err);
    if (evidence->parsed()) return cmd_evidence(flags, image, out);
    if (theory->parsed()) return cmd_theory(experiment, theory_seed, out);
    if (selftest->parsed()) return cmd_selftest(fixture, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return runtime_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return runtime_failure;
  }
  err << app.help();
  return usage;
}

}  // namespace fcl::cli
