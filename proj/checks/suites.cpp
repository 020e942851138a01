#include "suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fcl/calibrate.hpp"
#include "fcl/config.hpp"
#include "fcl/evidence.hpp"
#include "fcl/explore.hpp"
#include "fcl/run.hpp"
#include "fcl/theorylab.hpp"
#include "oracles.hpp"

namespace fcl::checks {

namespace {

using Clock = std::chrono::steady_clock;

class Timer {
public:
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

private:
  Clock::time_point start_ = Clock::now();
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

SuiteResult finish(std::string name, bool ok, std::string detail, const Timer& t, double limit) {
  SuiteResult r;
  r.name = std::move(name);
  r.seconds = t.seconds();
  r.passed = ok && r.seconds < limit;
  r.detail = std::move(detail) + fmt("; limit %.0f s", limit);
  return r;
}

Vector normal_vector(RngStream& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

EmbeddingVector random_unit(RngStream& rng, std::size_t dim) {
  return EmbeddingVector::normalize(normal_vector(rng, dim));
}

std::vector<std::size_t> random_subset(RngStream& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.below(n - i)]);
  ids.resize(k);
  return ids;
}

long double max_abs_diff(std::span<const double> a, std::span<const long double> b) {
  long double worst = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<long double>(a[i]) - b[i]));
  }
  return worst;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------

SuiteResult bound_suite(std::uint64_t seed) {
  Timer timer;
  RngStream rng(seed, 0);
  std::size_t violations = 0;
  long double worst_formula = 0.0L;
  double worst_two_class = 0.0;
  const std::size_t instances = 10000;
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t classes = 2 + rng.below(n % 4 == 0 ? 1 : 40);
    const double scale = std::exp(rng.uniform(-3.0, 4.0));
    Vector s = normal_vector(rng, classes, scale);
    // Exact ties at the maximum make the bound tight.
    if (n % 7 == 0) {
      const std::size_t top = row_argmax(s);
      for (std::size_t j = 0; j < classes; ++j) {
        if (j != top && rng.bernoulli(0.5)) s[j] = s[top];
      }
    }
    const std::size_t i = rng.below(classes);
    const double p = softmax(s)[i];
    const double b = theory::softmax_lower_bound(theory::margin(s, i), classes);
    const long double ob = oracle::bound(s, i);
    worst_formula = std::max(worst_formula, std::fabs(static_cast<long double>(b) - ob));
    // Four ulps of slack for rounding when the bound is attained.
    if (p < b - 4.0 * std::numeric_limits<double>::epsilon() * b) ++violations;
    if (classes == 2) worst_two_class = std::max(worst_two_class, std::fabs(p - b));
  }
  const bool ok = violations == 0 && worst_two_class <= 1e-12 && worst_formula <= 1e-12L;
  return finish("bound", ok,
                fmt("%zu instances, %zu violations, two-class max |p - bound| %.3g, "
                    "bound vs oracle %.3g",
                    instances, violations, worst_two_class, static_cast<double>(worst_formula)),
                timer, 5.0);
}

// ---------------------------------------------------------------------------

namespace {

struct GradientCase {
  std::shared_ptr<const TextEncoder> encoder;
  ContextParams base;
  std::size_t classes = 0;
};

GradientCase toy_case(RngStream& rng, PromptMode mode, std::uint64_t seed) {
  ClassVocabulary vocab;
  const std::size_t classes = 3 + rng.below(5);
  for (std::size_t c = 0; c < classes; ++c) vocab.names.push_back("class " + std::to_string(c));
  const std::size_t token_dim = 4 + rng.below(8);
  GradientCase g;
  g.encoder = std::make_shared<ToyTextEncoder>(
      ToyTextEncoder::from_vocabulary(vocab, 16, token_dim, 8, seed));
  g.base = make_context("a photo of a", token_dim, mode, 1 + rng.below(4), seed);
  g.classes = classes;
  return g;
}

GradientCase affine_case(RngStream& rng, PromptMode mode, std::uint64_t seed) {
  theory::WorldSpec w;
  w.classes = 3 + rng.below(4);
  w.dim = 2 * w.classes + 2 + rng.below(8);
  w.token_dim = 3 + rng.below(6);
  w.context_tokens = 1 + rng.below(4);
  for (std::size_t c = 0; c < w.classes; ++c) {
    w.common_alignment.push_back(rng.uniform(0.2, 0.5));
    w.self_alignment.push_back(rng.uniform(0.5, 0.8));
  }
  w.context_sensitivity = rng.uniform(0.5, 3.0);
  w.fairness_gain = rng.uniform(0.0, 20.0);
  w.seed = seed;
  theory::SyntheticWorld world(w);
  GradientCase g;
  g.encoder = world.text_ptr();
  g.classes = w.classes;
  ContextParams base = world.base_context();
  if (mode == PromptMode::hard_prompt_prefix) {
    Matrix hard(2, w.token_dim);
    for (double& v : hard.flat()) v = rng.normal();
    base = ContextParams(base.learnable(), mode, std::move(hard));
  }
  g.base = std::move(base);
  return g;
}

}  // namespace

SuiteResult gradient_suite(std::uint64_t seed) {
  Timer timer;
  const std::size_t episodes = 50;
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t failures = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    RngStream rng(seed, e);
    const PromptMode mode = (e / 2) % 2 == 0 ? PromptMode::context : PromptMode::hard_prompt_prefix;
    const GradientCase g = e % 2 == 0 ? toy_case(rng, mode, seed * 1000 + e)
                                      : affine_case(rng, mode, seed * 1000 + e);
    const std::size_t dim = g.encoder->dim();
    const std::size_t k = 2 + rng.below(std::min<std::size_t>(g.classes, 5) - 1);
    std::vector<std::size_t> candidates = random_subset(rng, g.classes, k);

    PairSet pairs;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        pairs.pairs.push_back({candidates[a], candidates[b], random_unit(rng, dim), rng.uniform()});
      }
    }
    CalibConfig cfg;
    cfg.lambda_cal = rng.uniform(0.5, 2.0);
    cfg.lambda_align = rng.uniform(0.5, 2.0);
    const CalibrationObjective objective(*g.encoder, candidates, std::move(pairs), g.base,
                                         random_unit(rng, dim), 20.0, cfg);

    ContextParams delta = g.base;
    for (double& v : delta.learnable().flat()) v += 0.05 * rng.normal();
    Matrix grad;
    objective.evaluate(delta, grad);

    double diff2 = 0.0;
    double ref2 = 0.0;
    const std::size_t params = delta.parameter_count();
    for (std::size_t p = 0; p < params; ++p) {
      ContextParams plus = delta;
      ContextParams minus = delta;
      plus.learnable().flat()[p] += h;
      minus.learnable().flat()[p] -= h;
      const double fd = (objective.evaluate(plus).total - objective.evaluate(minus).total) / (2.0 * h);
      const double d = grad.flat()[p] - fd;
      diff2 += d * d;
      ref2 += fd * fd;
    }
    const double rel = std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-12);
    worst = std::max(worst, rel);
    if (!(rel < 1e-4)) ++failures;
  }
  return finish("gradient", failures == 0,
                fmt("%zu objectives, max normwise relative error %.3g (h = 1e-5), %zu above 1e-4",
                    episodes, worst, failures),
                timer, 30.0);
}

// ---------------------------------------------------------------------------

namespace {

bool rows_equal(const Matrix& m, std::size_t a, std::size_t b) {
  return std::equal(m.row(a).begin(), m.row(a).end(), m.row(b).begin());
}

bool cols_equal(const Matrix& m, std::size_t a, std::size_t b) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m(r, a) != m(r, b)) return false;
  }
  return true;
}

/// Random score matrix with planted exact ties: shared row maxima, duplicated
/// rows and duplicated columns.
ScoreMatrix random_scores(RngStream& rng) {
  const std::size_t views = 2 + rng.below(14);
  const std::size_t classes = 2 + rng.below(8);
  ScoreMatrix sm;
  sm.scores = Matrix(views, classes);
  const double scale = rng.uniform(0.5, 6.0);
  for (double& v : sm.scores.flat()) v = scale * rng.normal();
  for (std::size_t r = 0; r < views; ++r) {
    if (rng.bernoulli(0.3)) {
      const auto row = sm.scores.row(r);
      row[rng.below(classes)] = row[row_argmax(row)];
    }
  }
  if (rng.bernoulli(0.4)) {
    const std::size_t a = rng.below(classes);
    const std::size_t b = rng.below(classes);
    for (std::size_t r = 0; r < views; ++r) sm.scores(r, b) = sm.scores(r, a);
  }
  for (std::size_t r = 1; r < views; ++r) {
    if (rng.bernoulli(0.2)) {
      const std::size_t src = rng.below(r);
      std::copy(sm.scores.row(src).begin(), sm.scores.row(src).end(), sm.scores.row(r).begin());
    }
  }
  // Distinct ids, not in column order, so the id tie-break is exercised.
  sm.class_ids = random_subset(rng, classes + 6, classes);
  return sm;
}

/// True when two views have entropies within 1e-9 without being identical
/// rows. Such instances have no well-defined order in floating point and are
/// redrawn.
bool ambiguous(const ScoreMatrix& sm) {
  const Matrix& m = sm.scores;
  std::vector<long double> h(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) h[r] = oracle::entropy_of_scores(m.row(r));
  for (std::size_t a = 0; a < m.rows(); ++a) {
    for (std::size_t b = a + 1; b < m.rows(); ++b) {
      if (std::fabs(h[a] - h[b]) < 1e-9L && !rows_equal(m, a, b)) return true;
    }
  }
  return false;
}

/// Same for classes whose mean probabilities are within 1e-9 without the
/// columns being identical.
bool near_tie_in_means(const oracle::Tally& t, const Matrix& m) {
  for (std::size_t a = 0; a < t.mean_probs.size(); ++a) {
    for (std::size_t b = a + 1; b < t.mean_probs.size(); ++b) {
      if (cols_equal(m, a, b)) continue;
      if (std::fabs(t.mean_probs[a] - t.mean_probs[b]) < 1e-9L) return true;
    }
  }
  return false;
}

struct OracleTally {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  long double worst = 0.0L;
  std::size_t ties = 0;  ///< instances with at least one planted exact tie
};

Aggregation random_aggregation(RngStream& rng) {
  return rng.bernoulli(0.5) ? Aggregation::voting : Aggregation::mean;
}

}  // namespace

SuiteResult oracle_suite(std::uint64_t seed) {
  Timer timer;
  const std::size_t target = 250;
  const double tol = 1e-12;
  RngStream rng(seed, 0);
  OracleTally filter, votes, topk, evidence, common;

  auto next_scores = [&]() {
    for (;;) {
      ScoreMatrix sm = random_scores(rng);
      if (!ambiguous(sm)) return sm;
    }
  };
  auto has_tie = [](const ScoreMatrix& sm) {
    const Matrix& m = sm.scores;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      if (std::count(row.begin(), row.end(), row[row_argmax(row)]) > 1) return true;
      for (std::size_t q = r + 1; q < m.rows(); ++q) {
        if (rows_equal(m, r, q)) return true;
      }
    }
    return false;
  };

  for (std::size_t n = 0; n < target; ++n) {
    const ScoreMatrix sm = next_scores();
    const double rho = rng.uniform(0.01, 1.0);
    ++filter.instances;
    if (has_tie(sm)) ++filter.ties;
    if (filter_low_entropy(sm, rho) != oracle::filter_low_entropy(sm.scores, rho)) ++filter.mismatches;
  }

  for (std::size_t n = 0; n < target; ++n) {
    const ScoreMatrix sm = next_scores();
    const Aggregation agg = random_aggregation(rng);
    const std::vector<std::size_t> retained =
        random_subset(rng, sm.views(), 1 + rng.below(sm.views()));
    const VoteResult got = vote(sm, retained, agg);
    const oracle::Tally want = oracle::vote(sm.scores, retained, agg);
    const long double d = std::max(max_abs_diff(got.fractions, want.fractions),
                                   max_abs_diff(got.mean_probs, want.mean_probs));
    ++votes.instances;
    if (has_tie(sm)) ++votes.ties;
    votes.worst = std::max(votes.worst, d);
    if (d > tol) ++votes.mismatches;
  }

  while (topk.instances < target) {
    const ScoreMatrix sm = next_scores();
    ExploreConfig cfg;
    cfg.rho = rng.uniform(0.01, 1.0);
    cfg.top_k = 1 + rng.below(sm.classes() + 2);
    cfg.aggregation = random_aggregation(rng);
    const std::vector<std::size_t> retained = oracle::filter_low_entropy(sm.scores, cfg.rho);
    const oracle::Tally tally = oracle::vote(sm.scores, retained, cfg.aggregation);
    if (near_tie_in_means(tally, sm.scores)) continue;
    const CandidateSet got = explore_topk(sm, cfg);
    const std::vector<std::size_t> want =
        oracle::explore_topk(sm.scores, sm.class_ids, cfg.rho, cfg.top_k, cfg.aggregation);
    ++topk.instances;
    if (has_tie(sm)) ++topk.ties;
    if (got.class_ids != want || got.retained_views != retained) {
      ++topk.mismatches;
      continue;
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
      const auto col = static_cast<std::size_t>(
          std::find(sm.class_ids.begin(), sm.class_ids.end(), want[i]) - sm.class_ids.begin());
      const long double d =
          std::max(std::fabs(got.vote_fractions[i] - tally.fractions[col]),
                   std::fabs(got.mean_probs[i] - tally.mean_probs[col]));
      topk.worst = std::max(topk.worst, d);
      if (d > tol) {
        ++topk.mismatches;
        break;
      }
    }
  }

  for (std::size_t n = 0; n < target; ++n) {
    const std::size_t height = 3 + rng.below(30);
    const std::size_t width = 3 + rng.below(30);
    EvidenceConfig cfg;
    cfg.masks = 1 + rng.below(24);
    cfg.grid_sizes.clear();
    const std::size_t grids = 1 + rng.below(4);
    for (std::size_t g = 0; g < grids; ++g) cfg.grid_sizes.push_back(2 + rng.below(12));
    cfg.gamma = rng.uniform(0.05, 0.95);
    const std::vector<MaskSpec> masks = sample_masks(cfg, height, width, rng.fork(n));
    bool ok = true;
    for (const MaskSpec& m : masks) {
      const std::size_t k = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(cfg.gamma * static_cast<double>(m.grid * m.grid))), 1,
          m.grid * m.grid - 1);
      std::vector<std::size_t> sorted = m.cells;
      std::sort(sorted.begin(), sorted.end());
      const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
      ok = ok && m.cells.size() == k && distinct &&
           m.pixels == oracle::rasterize(m.grid, m.cells, height, width);
    }
    const Vector coeffs = normal_vector(rng, masks.size(), rng.uniform(0.1, 5.0));
    const std::vector<double> want = oracle::class_evidence(masks, coeffs);
    const EvidenceMap serial = class_evidence_map(masks, coeffs, kernels::Exec::serial);
    const EvidenceMap parallel = class_evidence_map(masks, coeffs, kernels::Exec::parallel);
    const double d = max_abs_diff(serial.values, want);
    ok = ok && serial.values == parallel.values && serial.height == height && serial.width == width;
    ++evidence.instances;
    evidence.worst = std::max<long double>(evidence.worst, d);
    if (!ok || d > tol) ++evidence.mismatches;
  }

  for (std::size_t n = 0; n < target; ++n) {
    const std::size_t height = 2 + rng.below(24);
    const std::size_t width = 2 + rng.below(24);
    const double scale = rng.uniform(0.01, 20.0);
    EvidenceMap ei{height, width, normal_vector(rng, height * width, scale)};
    EvidenceMap ej{height, width, normal_vector(rng, height * width, scale)};
    if (rng.bernoulli(0.2)) ej.values = ei.values;
    const std::size_t ci = rng.below(50);
    const std::size_t cj = ci + 1 + rng.below(50);
    const SpatialProbMap si = spatial_softmax(ei);
    const SpatialProbMap sj = spatial_softmax(ej);
    const CommonEvidenceMap q = common_evidence_map(si, sj, ci, cj);
    const long double d = std::max({max_abs_diff(si.values(), oracle::spatial_softmax(ei.values)),
                                    max_abs_diff(sj.values(), oracle::spatial_softmax(ej.values)),
                                    max_abs_diff(q.values(), oracle::common_map(si.values(), sj.values()))});
    ++common.instances;
    common.worst = std::max(common.worst, d);
    const bool ok = q.first() == ci && q.second() == cj && q.height() == height && q.width() == width;
    if (!ok || d > tol) ++common.mismatches;
  }

  const std::size_t mismatches =
      filter.mismatches + votes.mismatches + topk.mismatches + evidence.mismatches + common.mismatches;
  auto line = [](const char* name, const OracleTally& t) {
    return fmt("%s %zu/%zu (ties %zu, max diff %.2g)", name, t.instances - t.mismatches, t.instances,
               t.ties, static_cast<double>(t.worst));
  };
  return finish("oracle", mismatches == 0,
                line("filter_low_entropy", filter) + ", " + line("vote", votes) + ", " +
                    line("explore_topk", topk) + ", " + line("class_evidence_map", evidence) + ", " +
                    line("common_evidence_map", common),
                timer, 30.0);
}

// ---------------------------------------------------------------------------

SuiteResult normalization_suite(std::uint64_t seed) {
  Timer timer;
  RngStream rng(seed, 0);
  const std::size_t inputs = 1000;
  double worst = 0.0;
  std::size_t failures = 0;
  auto check = [&](std::span<const double> v) {
    long double s = 0.0L;
    for (double x : v) s += x;
    const double dev = static_cast<double>(std::fabs(s - 1.0L));
    worst = std::max(worst, dev);
    if (!(dev <= 1e-9)) ++failures;
  };
  for (std::size_t n = 0; n < inputs; ++n) {
    const double scale = std::exp(rng.uniform(-4.0, 6.0));
    const Vector scores = normal_vector(rng, 2 + rng.below(200), scale);
    check(softmax(scores).probs());
    check(restricted_posterior(scores).probs());

    const std::size_t height = 1 + rng.below(40);
    const std::size_t width = 1 + rng.below(40);
    const SpatialProbMap si =
        spatial_softmax({height, width, normal_vector(rng, height * width, scale)});
    const SpatialProbMap sj =
        spatial_softmax({height, width, normal_vector(rng, height * width, scale)});
    check(si.values());
    check(sj.values());
    check(common_evidence_map(si, sj, 0, 1).values());

    const std::size_t dim = 2 + rng.below(30);
    const EmbeddingVector z = random_unit(rng, dim);
    check(pairwise_posterior(z, random_unit(rng, dim), random_unit(rng, dim), 20.0).probs());
  }
  return finish("normalization", failures == 0,
                fmt("%zu inputs (6 distributions each), max |sum - 1| %.3g, %zu above 1e-9", inputs,
                    worst, failures),
                timer, 30.0);
}

// ---------------------------------------------------------------------------

SuiteResult calibration_suite(std::uint64_t seed) {
  Timer timer;
  theory::FailureSpec spec = theory::FailureSpec::biased();
  spec.seed = seed;
  const theory::FailureReport r = theory::run_failure_mode_experiments(spec);
  const std::size_t n = r.trials.size();
  double cal_before = 0.0, cal_after = 0.0, gap_before = 0.0, gap_after = 0.0;
  for (const theory::FailureTrial& t : r.trials) {
    cal_before += t.cal_before;
    cal_after += t.cal_after;
    gap_before += t.gap_before;
    gap_after += t.gap_after;
  }
  const double inv = 1.0 / static_cast<double>(n);
  const bool ok = n == 100 && r.cal_decreased() >= 95 && r.gap_decreased() >= 95;
  return finish("calibration-efficacy", ok,
                fmt("L_cal decreased %zu/%zu (mean %.4f -> %.4f), gap decreased %zu/%zu "
                    "(mean %.4f -> %.4f)",
                    r.cal_decreased(), n, cal_before * inv, cal_after * inv, r.gap_decreased(), n,
                    gap_before * inv, gap_after * inv),
                timer, 120.0);
}

SuiteResult failure_suite() {
  Timer timer;
  const theory::FailureReport biased =
      theory::run_failure_mode_experiments(theory::FailureSpec::biased());
  const theory::FailureReport control =
      theory::run_failure_mode_experiments(theory::FailureSpec::unbiased());
  const std::size_t n = biased.trials.size();
  const std::size_t wrong = biased.vote_wrong();
  // The planted optimum bounds what any calibration can achieve.
  const bool ok = biased.amplified() == n && wrong == n && 10 * biased.fcl_flipped() >= 6 * wrong &&
                  10 * biased.oracle_flipped() >= 6 * wrong &&
                  100 * control.fcl_correct() >= 95 * control.vote_correct();
  return finish("failure-modes", ok,
                fmt("amplified %zu/%zu, vote wrong %zu/%zu, FCL flipped %zu/%zu, planted optimum "
                    "flipped %zu/%zu; unbiased control: vote correct %zu, FCL correct %zu",
                    biased.amplified(), n, wrong, n, biased.fcl_flipped(), wrong,
                    biased.oracle_flipped(), wrong, control.vote_correct(), control.fcl_correct()),
                timer, 120.0);
}

SuiteResult trend_suite() {
  Timer timer;
  const theory::ToyImageWorld world(theory::default_image_spec());
  const EvaluationResult trend = theory::ecec_trend(world, theory::TrendSpec{});
  const PredictionOutcome& o = trend.outcome;

  theory::CorrelationSpec cs;
  cs.world.dim = 32;
  cs.world.classes = 4;
  cs.world.common_alignment = {0.4, 0.4, 0.4, 0.4};
  cs.world.self_alignment = {0.7, 0.7, 0.7, 0.7};
  const theory::CorrelationResult swept = theory::euec_entropy_correlation(cs);
  cs.mode = theory::CorrelationMode::null;
  cs.views = 500;
  const theory::CorrelationResult null_model = theory::euec_entropy_correlation(cs);

  const bool ecec_ok = o.mean_ecec_correct && o.mean_ecec_incorrect && o.ecec_rank_test_p &&
                       *o.mean_ecec_incorrect > *o.mean_ecec_correct && *o.ecec_rank_test_p < 0.01;
  const bool euec_ok = swept.spearman && *swept.spearman < -0.5;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return finish("metric-trend", ecec_ok && euec_ok && trend.episodes.size() == 200,
                fmt("%zu episodes, mean ECEC correct %.4f vs incorrect %.4f, rank test p %.3g; "
                    "swept EUEC-entropy Spearman %.3f; null model Spearman %.3f",
                    trend.episodes.size(), o.mean_ecec_correct.value_or(nan),
                    o.mean_ecec_incorrect.value_or(nan), o.ecec_rank_test_p.value_or(nan),
                    swept.spearman.value_or(nan), null_model.spearman.value_or(nan)),
                timer, 120.0);
}

SuiteResult proxy_suite() {
  Timer timer;
  const theory::ToyImageWorld world(theory::default_image_spec());
  const theory::ProxyResult r = theory::proxy_reconstruction(world, theory::ProxySpec{});
  return finish("proxy", r.instances == 200 && 10 * r.holds >= 9 * r.instances,
                fmt("proxy sum beats every component in %zu/%zu instances, mean cosine %.4f", r.holds,
                    r.instances, mean(r.cos_sum)),
                timer, 120.0);
}

SuiteResult determinism_suite(const std::filesystem::path& fixture_config) {
  Timer timer;
  try {
    RunConfig cfg = load_config(fixture_config);
    const LoadedModels models = load_models(cfg);
    auto run = [&](int parallel) {
      cfg.parallel = parallel;
      return run_evaluation(cfg, models, [](const std::string&) {});
    };
    const EvaluationOutput a = run(1);
    const EvaluationOutput b = run(1);
    const EvaluationOutput c = run(8);
    const bool same = a.json == b.json && a.json == c.json && a.csv == b.csv && a.csv == c.csv;
    return finish("determinism", same && !a.result.episodes.empty(),
                  fmt("%zu episodes, %zu report bytes, runs 1/1/8 %s", a.result.episodes.size(),
                      a.json.size(), same ? "identical" : "differ"),
                  timer, 120.0);
  } catch (const std::exception& e) {
    return finish("determinism", false, std::string("error: ") + e.what(), timer, 120.0);
  }
}

std::vector<SuiteResult> run_all(const std::filesystem::path& fixture_config,
                                 const SuiteReporter& report) {
  const std::vector<std::pair<std::string, std::function<SuiteResult()>>> suites{
      {"bound", [] { return bound_suite(); }},
      {"gradient", [] { return gradient_suite(); }},
      {"oracle", [] { return oracle_suite(); }},
      {"normalization", [] { return normalization_suite(); }},
      {"calibration-efficacy", [] { return calibration_suite(); }},
      {"failure-modes", [] { return failure_suite(); }},
      {"metric-trend", [] { return trend_suite(); }},
      {"proxy", [] { return proxy_suite(); }},
      {"determinism", [&] { return determinism_suite(fixture_config); }},
  };
  std::vector<SuiteResult> out;
  for (const auto& [name, suite] : suites) {
    SuiteResult r;
    try {
      r = suite();
    } catch (const std::exception& e) {
      r.name = name;
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    if (report) report(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_result(const SuiteResult& r) {
  return fmt("%s %s (%.2f s): ", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds) + r.detail;
}

}  // namespace fcl::checks
