#include "fcl/theorylab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "fcl/error.hpp"

namespace fcl::theory {

double margin(std::span<const double> scores, std::size_t i) {
  if (scores.size() < 2) throw InvalidArgument("margin: needs at least two classes");
  if (i >= scores.size()) throw InvalidArgument("margin: class index out of range");
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != i) best = std::max(best, scores[j]);
  }
  return scores[i] - best;
}

double softmax_lower_bound(double m, std::size_t classes) {
  if (classes < 2) throw InvalidArgument("softmax_lower_bound: needs at least two classes");
  return 1.0 / (1.0 + static_cast<double>(classes - 1) * std::exp(-m));
}

Matrix orthonormal_rows(std::size_t count, std::size_t dim, RngStream rng) {
  if (count > dim) throw InvalidArgument("orthonormal_rows: more rows than dimensions");
  Matrix q(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    for (;;) {
      Vector v(dim);
      for (double& x : v) x = rng.normal();
      // Two passes of modified Gram–Schmidt keep the rows orthogonal to ~1e-16.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < r; ++p) {
          const double c = dot(v, q.row(p));
          for (std::size_t k = 0; k < dim; ++k) v[k] -= c * q(p, k);
        }
      }
      const double n = norm(v);
      if (n < 1e-6) continue;
      for (std::size_t k = 0; k < dim; ++k) q(r, k) = v[k] / n;
      break;
    }
  }
  return q;
}

// ---------------------------------------------------------------------------

void WorldSpec::validate() const {
  if (classes < 2) throw InvalidArgument("world: needs at least two classes");
  if (dim < 2 * classes + 2) throw InvalidArgument("world: dim must be >= 2 * classes + 2");
  if (common_alignment.size() != classes || self_alignment.size() != classes) {
    throw InvalidArgument("world: one common and one self alignment per class");
  }
  for (std::size_t c = 0; c < classes; ++c) {
    const double a = common_alignment[c];
    const double b = self_alignment[c];
    if (a * a + b * b > 1.0 + 1e-12) {
      throw InvalidArgument("world: class " + std::to_string(c) + " alignments exceed unit norm");
    }
  }
  if (token_dim == 0 || context_tokens == 0) throw InvalidArgument("world: empty context");
  if (!(beta > 0.0)) throw InvalidArgument("world: beta must be > 0");
  if (!(context_sensitivity >= 0.0)) throw InvalidArgument("world: negative sensitivity");
  if (!std::isfinite(fairness_gain)) throw InvalidArgument("world: non-finite fairness gain");
}

SyntheticWorld::SyntheticWorld(const WorldSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t d = spec_.dim;
  const std::size_t c_count = spec_.classes;
  basis_ = orthonormal_rows(d, d, RngStream::derive(spec_.seed, 0, "world-basis"));

  Matrix offsets(c_count, d);
  for (std::size_t c = 0; c < c_count; ++c) {
    const double a = spec_.common_alignment[c];
    const double b = spec_.self_alignment[c];
    const double r = std::sqrt(std::max(0.0, 1.0 - a * a - b * b));
    const auto filler = basis_.row(1 + c_count + c);
    for (std::size_t k = 0; k < d; ++k) {
      offsets(c, k) = a * common()[k] + b * unique(c)[k] + r * filler[k];
    }
  }

  const std::size_t p = spec_.context_tokens * spec_.token_dim;
  const double scale = spec_.context_sensitivity / std::sqrt(static_cast<double>(p));
  Vector fair(p);
  {
    RngStream rng = RngStream::derive(spec_.seed, 0, "world-fair-direction");
    for (double& v : fair) v = rng.normal() / std::sqrt(static_cast<double>(p));
  }
  const double mean_common =
      std::accumulate(spec_.common_alignment.begin(), spec_.common_alignment.end(), 0.0) /
      static_cast<double>(c_count);
  std::vector<Matrix> jacobians;
  for (std::size_t c = 0; c < c_count; ++c) {
    RngStream rng = RngStream::derive(spec_.seed, c, "world-jacobian");
    Matrix j(d, p);
    for (double& v : j.flat()) v = scale * rng.normal();
    const double pull = spec_.fairness_gain * (mean_common - spec_.common_alignment[c]);
    if (pull != 0.0) {
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t k = 0; k < p; ++k) j(r, k) += pull * common()[r] * fair[k];
      }
    }
    jacobians.push_back(std::move(j));
  }
  text_ = std::make_shared<AffineTextEncoder>(std::move(offsets), std::move(jacobians),
                                              spec_.token_dim);
}

std::size_t SyntheticWorld::spare_count() const noexcept {
  return spec_.dim - (1 + 2 * spec_.classes);
}

std::span<const double> SyntheticWorld::spare(std::size_t i) const {
  if (i >= spare_count()) throw InvalidArgument("world: spare direction out of range");
  return basis_.row(1 + 2 * spec_.classes + i);
}

ContextParams SyntheticWorld::base_context() const {
  return ContextParams(Matrix(spec_.context_tokens, spec_.token_dim));
}

EmbeddingVector SyntheticWorld::tau(std::size_t c, const ContextParams& delta) const {
  return text_->encode(c, delta);
}

Vector SyntheticView::combined(const SyntheticWorld& world) const {
  if (a_unique.size() != world.classes()) throw ShapeMismatch("view: one unique coefficient per class");
  Vector v(world.dim(), 0.0);
  const auto zc = world.common();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a_common * zc[k];
  for (std::size_t l = 0; l < world.classes(); ++l) {
    const auto u = world.unique(l);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += a_unique[l] * u[k];
  }
  if (!noise.empty()) {
    if (noise.size() != v.size()) throw ShapeMismatch("view: noise dimension");
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += noise[k];
  }
  return v;
}

EmbeddingVector SyntheticView::embedding(const SyntheticWorld& world) const {
  return EmbeddingVector::normalize(combined(world));
}

MarginBreakdown margin_breakdown(const SyntheticView& view, const SyntheticWorld& world,
                                 const ContextParams& delta, std::size_t y) {
  const std::size_t c_count = world.classes();
  if (y >= c_count) throw InvalidArgument("margin_breakdown: class out of range");
  std::vector<EmbeddingVector> tau;
  for (std::size_t c = 0; c < c_count; ++c) tau.push_back(world.tau(c, delta));
  const Vector v = view.combined(world);
  const double beta = world.spec().beta;

  MarginBreakdown mb;
  mb.unique_term = view.a_unique[y] * dot(world.unique(y), tau[y].values());
  double worst = -std::numeric_limits<double>::infinity();
  double best_direct = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c_count; ++j) {
    if (j == y) continue;
    CompetitorTerms t;
    t.competitor = j;
    Vector diff(world.dim());
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = tau[j][k] - tau[y][k];
    t.common_bias = view.a_common * dot(world.common(), diff);
    t.competitor_unique = view.a_unique[j] * dot(world.unique(j), tau[j].values());
    t.residual = view.a_unique[y] * dot(world.unique(y), tau[j].values()) -
                 view.a_unique[j] * dot(world.unique(j), tau[y].values());
    for (std::size_t l = 0; l < c_count; ++l) {
      if (l != y && l != j) t.residual += view.a_unique[l] * dot(world.unique(l), diff);
    }
    if (!view.noise.empty()) t.residual += dot(view.noise, diff);
    const double total = t.common_bias + t.competitor_unique + t.residual;
    if (total > worst) {
      worst = total;
      mb.argmax_competitor = j;
    }
    best_direct = std::max(best_direct, dot(v, tau[j].values()));
    mb.competitors.push_back(t);
  }
  mb.recombined = beta * (mb.unique_term - worst);
  mb.direct = beta * (dot(v, tau[y].values()) - best_direct);
  mb.normalized = mb.direct / norm(v);
  return mb;
}

ScoreTerms score_decomposition(const SyntheticView& view, const SyntheticWorld& world,
                               const ContextParams& delta, std::size_t i) {
  if (i >= world.classes()) throw InvalidArgument("score_decomposition: class out of range");
  const EmbeddingVector tau = world.tau(i, delta);
  ScoreTerms s;
  s.common = view.a_common * dot(world.common(), tau.values());
  s.own_unique = view.a_unique[i] * dot(world.unique(i), tau.values());
  for (std::size_t l = 0; l < world.classes(); ++l) {
    if (l != i) s.cross_unique += view.a_unique[l] * dot(world.unique(l), tau.values());
  }
  if (!view.noise.empty()) s.noise = dot(view.noise, tau.values());
  const double beta = world.spec().beta;
  s.total = beta * (s.common + s.own_unique + s.cross_unique + s.noise);
  s.direct = beta * dot(view.combined(world), tau.values());
  return s;
}

// ---------------------------------------------------------------------------

namespace {

WorldSpec failure_world() {
  WorldSpec w;
  w.dim = 32;
  w.classes = 4;
  w.common_alignment = {0.25, 0.6, 0.3, 0.3};
  w.self_alignment = {0.7, 0.6, 0.6, 0.6};
  w.context_sensitivity = 2.0;
  w.fairness_gain = 45.0;
  return w;
}

double deg(double degrees) { return degrees * std::numbers::pi / 180.0; }

EmbeddingVector mixed_view(const SyntheticWorld& world, std::size_t y, double angle,
                           double noise, RngStream& rng) {
  SyntheticView v;
  v.a_common = std::cos(angle);
  v.a_unique.assign(world.classes(), 0.0);
  v.a_unique[y] = std::sin(angle);
  v.noise.resize(world.dim());
  const double s = noise / std::sqrt(static_cast<double>(world.dim()));
  for (double& e : v.noise) e = s * rng.normal();
  return v.embedding(world);
}

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

double common_gap(const SyntheticWorld& world, std::size_t i, std::size_t j,
                  const ContextParams& delta) {
  return std::abs(dot(world.common(), world.tau(i, delta).values()) -
                  dot(world.common(), world.tau(j, delta).values()));
}

}  // namespace

FailureSpec FailureSpec::biased() {
  FailureSpec s;
  s.world = failure_world();
  return s;
}

FailureSpec FailureSpec::unbiased() {
  FailureSpec s = biased();
  s.biased_fraction = 0.0;
  s.full_image_angle_min = 30.0;
  s.full_image_angle_max = 34.0;
  return s;
}

std::size_t FailureReport::amplified() const {
  return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const auto& t) {
    return t.wrong_prob_after > t.wrong_prob_before;
  }));
}
std::size_t FailureReport::vote_wrong() const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [&](const auto& t) { return t.vote_prediction == wrong_class; }));
}
std::size_t FailureReport::vote_correct() const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [&](const auto& t) { return t.vote_prediction == true_class; }));
}
std::size_t FailureReport::fcl_flipped() const {
  return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [&](const auto& t) {
    return t.vote_prediction == wrong_class && t.fcl_prediction == true_class;
  }));
}
std::size_t FailureReport::fcl_correct() const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [&](const auto& t) { return t.fcl_prediction == true_class; }));
}
std::size_t FailureReport::oracle_flipped() const {
  return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [&](const auto& t) {
    return t.vote_prediction == wrong_class && t.oracle_prediction == true_class;
  }));
}
std::size_t FailureReport::cal_decreased() const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [](const auto& t) { return t.cal_after < t.cal_before; }));
}
std::size_t FailureReport::gap_decreased() const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [](const auto& t) { return t.gap_after < t.gap_before; }));
}

ScoreMatrix synthetic_scores(const SyntheticWorld& world, std::span<const EmbeddingVector> views,
                             const ContextParams& delta) {
  return score_views(stack_rows(views), world.text(), iota_ids(world.classes()), delta,
                     world.spec().beta, kernels::Exec::serial);
}

double mean_entropy(const SyntheticWorld& world, std::span<const EmbeddingVector> views,
                    std::span<const std::size_t> retained, const ContextParams& delta,
                    Matrix* gradient) {
  if (retained.empty()) throw InvalidArgument("mean_entropy: no retained views");
  const std::size_t c_count = world.classes();
  const double beta = world.spec().beta;
  std::vector<EmbeddingVector> tau;
  for (std::size_t c = 0; c < c_count; ++c) tau.push_back(world.tau(c, delta));
  std::vector<Vector> upstream(c_count, Vector(world.dim(), 0.0));
  const double inv = 1.0 / static_cast<double>(retained.size());
  double total = 0.0;
  for (std::size_t k : retained) {
    Vector s(c_count);
    for (std::size_t c = 0; c < c_count; ++c) s[c] = similarity(views[k], tau[c], beta);
    const Vector lp = log_softmax(s);
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    total += h * inv;
    if (gradient == nullptr) continue;
    for (std::size_t c = 0; c < c_count; ++c) {
      const double ds = -std::exp(lp[c]) * (lp[c] + h) * inv * beta;
      const auto z = views[k].values();
      for (std::size_t d = 0; d < z.size(); ++d) upstream[c][d] += ds * z[d];
    }
  }
  if (gradient != nullptr) {
    *gradient = Matrix(delta.learnable().rows(), delta.learnable().cols());
    for (std::size_t c = 0; c < c_count; ++c) {
      const Matrix part = world.text().encode_vjp(c, delta, upstream[c]);
      for (std::size_t i = 0; i < part.size(); ++i) gradient->flat()[i] += part.flat()[i];
    }
  }
  return total;
}

FailureReport run_failure_mode_experiments(const FailureSpec& spec) {
  if (spec.views < 2) throw InvalidArgument("failure experiments need at least two views");
  FailureReport report;
  report.true_class = 0;
  report.wrong_class = 1;
  const std::size_t y = report.true_class;
  const std::size_t j = report.wrong_class;
  report.trials.resize(spec.trials);

  for (std::size_t t = 0; t < spec.trials; ++t) {
    WorldSpec ws = spec.world;
    ws.seed = stable_hash("failure-world") ^ RngStream::derive(spec.seed, t, "world").next_u64();
    const SyntheticWorld world(ws);
    const ContextParams base = world.base_context();
    const double beta = ws.beta;
    RngStream rng = RngStream::derive(spec.seed, t, "failure-views");

    const std::size_t rest = spec.views - 1;
    const auto n_biased =
        static_cast<std::size_t>(std::llround(spec.biased_fraction * static_cast<double>(rest)));
    std::vector<char> biased(rest, 0);
    std::fill(biased.begin(), biased.begin() + static_cast<std::ptrdiff_t>(n_biased), 1);
    for (std::size_t i = rest; i > 1; --i) std::swap(biased[i - 1], biased[rng.below(i)]);

    std::vector<EmbeddingVector> views;
    views.push_back(mixed_view(world, y,
                               deg(rng.uniform(spec.full_image_angle_min, spec.full_image_angle_max)),
                               spec.noise, rng));
    for (std::size_t k = 0; k < rest; ++k) {
      const double angle = biased[k] ? rng.uniform(spec.biased_angle_min, spec.biased_angle_max)
                                     : rng.uniform(spec.unbiased_angle_min, spec.unbiased_angle_max);
      views.push_back(mixed_view(world, y, deg(angle), spec.noise, rng));
    }

    FailureTrial& trial = report.trials[t];
    const ScoreMatrix sm0 = synthetic_scores(world, views, base);
    trial.wrong_prob_before = softmax(sm0.scores.row(0))[j];

    ExploreConfig explore{spec.rho, 1, Aggregation::voting};
    trial.vote_prediction = explore_top1(sm0, explore);

    // Entropy minimization over the initially retained views.
    {
      const std::vector<std::size_t> retained = filter_low_entropy(sm0, spec.rho);
      ContextParams delta = base;
      AdamWOptions opts;
      opts.learning_rate = spec.calibrate.learning_rate;
      AdamWState state(delta.parameter_count(), opts);
      for (std::size_t s = 0; s < spec.entropy_steps; ++s) {
        Matrix g;
        mean_entropy(world, views, retained, delta, &g);
        adamw_step(delta.learnable().flat(), g.flat(), state);
      }
      const ScoreMatrix after = synthetic_scores(world, std::span(views).first(1), delta);
      trial.wrong_prob_after = softmax(after.scores.row(0))[j];
    }

    // FCL with the planted common component as the common-evidence embedding.
    explore.top_k = 10;
    const CandidateSet ck = explore_topk(sm0, explore);
    Vector ck_scores(ck.size());
    for (std::size_t c = 0; c < ck.size(); ++c) ck_scores[c] = sm0.scores(0, ck.class_ids[c]);
    const ProbDist post = softmax(ck_scores);
    const EmbeddingVector zc =
        EmbeddingVector::from_unit(Vector(world.common().begin(), world.common().end()));
    PairSet pairs;
    for (std::size_t a = 0; a < ck.size(); ++a) {
      for (std::size_t b = a + 1; b < ck.size(); ++b) {
        pairs.pairs.push_back({ck.class_ids[a], ck.class_ids[b], zc, pair_weight(post[a], post[b])});
      }
    }
    const CalibrationObjective objective(world.text(), ck.class_ids, std::move(pairs), base,
                                         views[0], beta, spec.calibrate);
    const CalibResult calib = calibrate_context(objective);
    trial.cal_before = objective.evaluate(base).cal;
    trial.cal_after = objective.evaluate(calib.delta).cal;
    trial.gap_before = common_gap(world, j, y, base);
    trial.gap_after = common_gap(world, j, y, calib.delta);

    const ScoreMatrix final_scores = score_views(stack_rows(views), world.text(), ck.class_ids,
                                                 calib.delta, beta, kernels::Exec::serial);
    trial.fcl_prediction = explore_top1(final_scores, explore);

    // Planted optimum: every candidate's common alignment equalized.
    Matrix oracle_text(ck.size(), world.dim());
    double mean_common = 0.0;
    for (std::size_t c : ck.class_ids) mean_common += dot(world.common(), world.tau(c, base).values());
    mean_common /= static_cast<double>(ck.size());
    for (std::size_t c = 0; c < ck.size(); ++c) {
      const EmbeddingVector tau = world.tau(ck.class_ids[c], base);
      const double shift = dot(world.common(), tau.values()) - mean_common;
      Vector adjusted(tau.vec());
      for (std::size_t k = 0; k < adjusted.size(); ++k) adjusted[k] -= shift * world.common()[k];
      const Vector unit = l2_normalize(adjusted);
      std::copy(unit.begin(), unit.end(), oracle_text.row(c).begin());
    }
    const ScoreMatrix oracle_scores =
        score_views(stack_rows(views), oracle_text, ck.class_ids, beta, kernels::Exec::serial);
    trial.oracle_prediction = explore_top1(oracle_scores, explore);
  }
  return report;
}

// ---------------------------------------------------------------------------

CorrelationResult euec_entropy_correlation(const CorrelationSpec& spec) {
  if (spec.views < 30) throw InvalidArgument("euec_entropy_correlation: needs at least 30 views");
  const SyntheticWorld world(spec.world);
  const ContextParams base = world.base_context();
  const std::size_t y = 0;
  std::vector<EmbeddingVector> tau;
  for (std::size_t c = 0; c < world.classes(); ++c) tau.push_back(world.tau(c, base));
  RngStream rng = RngStream::derive(spec.seed, 0, "euec-correlation");

  CorrelationResult r;
  for (std::size_t i = 0; i < spec.views; ++i) {
    SyntheticView v;
    v.a_common = spec.common_coefficient;
    v.a_unique.assign(world.classes(), 0.0);
    double reported;
    if (spec.mode == CorrelationMode::swept) {
      v.a_unique[y] = static_cast<double>(i) / static_cast<double>(spec.views - 1);
      reported = v.a_unique[y];
    } else {
      v.a_unique[y] = rng.uniform();
      reported = rng.uniform();
    }
    v.noise.resize(world.dim());
    const double s = spec.noise / std::sqrt(static_cast<double>(world.dim()));
    for (double& e : v.noise) e = s * rng.normal();

    const Vector raw = v.combined(world);
    const EmbeddingVector z = EmbeddingVector::normalize(raw);
    Vector scores(world.classes());
    for (std::size_t c = 0; c < scores.size(); ++c) scores[c] = similarity(z, tau[c], spec.world.beta);
    r.entropies.push_back(entropy(softmax(scores)));
    // Unique contribution of a view with coefficients (a_com, reported).
    const double scale = std::hypot(spec.common_coefficient, reported);
    r.euec.push_back(reported * dot(world.unique(y), tau[y].values()) / scale);
  }
  r.pearson = pearson(r.entropies, r.euec);
  r.spearman = spearman(r.entropies, r.euec);
  return r;
}

// ---------------------------------------------------------------------------

ToyImageSpec default_image_spec() {
  ToyImageSpec s;
  s.world.dim = 32;
  s.world.classes = 4;
  s.world.common_alignment = {0.6, 0.3, 0.3, 0.3};
  s.world.self_alignment = {0.6, 0.7, 0.7, 0.7};
  s.world.context_sensitivity = 2.0;
  s.world.fairness_gain = 45.0;
  s.world.seed = 17;
  return s;
}

ToyImageWorld::ToyImageWorld(const ToyImageSpec& spec) : spec_(spec), world_(spec.world) {
  if (spec_.size < 4 || spec_.size % 4 != 0) throw InvalidArgument("toy image size must be a multiple of 4");
  if (world_.spare_count() < 1) throw InvalidArgument("toy image world needs a spare direction");
  const std::size_t block = spec_.size / 4;
  const std::size_t tex_len = block * block * ImageTensor::channels;
  const std::size_t c_count = world_.classes();

  for (std::size_t t = 0; t <= c_count; ++t) {
    RngStream rng = RngStream::derive(spec_.seed, t, "toy-texture");
    Vector tex(tex_len);
    for (double& v : tex) v = rng.uniform(-1.0, 1.0);
    const double m = mean(tex);
    double peak = 0.0;
    for (double& v : tex) {
      v -= m;
      peak = std::max(peak, std::abs(v));
    }
    for (double& v : tex) v /= peak;
    textures_.push_back(std::move(tex));
  }

  const std::size_t inputs = spec_.size * spec_.size * ImageTensor::channels;
  const std::size_t d = world_.dim();
  Matrix w(d, inputs);
  RngStream clutter = RngStream::derive(spec_.seed, 0, "toy-clutter");
  const double clutter_scale = spec_.clutter / std::sqrt(static_cast<double>(inputs));
  for (double& v : w.flat()) v = clutter_scale * clutter.normal();

  for (std::size_t row = 0; row < spec_.size; ++row) {
    for (std::size_t col = 0; col < spec_.size; ++col) {
      const std::size_t local = ((row % block) * block + (col % block)) * ImageTensor::channels;
      const bool centre = in_common_region(row, col);
      for (std::size_t ch = 0; ch < ImageTensor::channels; ++ch) {
        const std::size_t in = (row * spec_.size + col) * ImageTensor::channels + ch;
        if (centre) {
          const Vector& t = textures_[0];
          const double g = t[local + ch] / (4.0 * spec_.texture_amplitude * dot(t, t));
          for (std::size_t k = 0; k < d; ++k) w(k, in) += g * world_.common()[k];
        } else {
          for (std::size_t c = 0; c < c_count; ++c) {
            const Vector& t = textures_[1 + c];
            const double g = t[local + ch] / (12.0 * spec_.texture_amplitude * dot(t, t));
            for (std::size_t k = 0; k < d; ++k) w(k, in) += g * world_.unique(c)[k];
          }
        }
      }
    }
  }
  Vector bias(d);
  for (std::size_t k = 0; k < d; ++k) bias[k] = spec_.bias * world_.spare(0)[k];
  visual_ = std::make_shared<ToyVisualEncoder>(std::move(w), std::move(bias), spec_.size, spec_.size);
}

bool ToyImageWorld::in_common_region(std::size_t row, std::size_t col) const {
  const std::size_t block = spec_.size / 4;
  const std::size_t br = row / block;
  const std::size_t bc = col / block;
  return (br == 1 || br == 2) && (bc == 1 || bc == 2);
}

ModelBundle ToyImageWorld::bundle() const {
  ModelBundle b;
  b.visual = visual_;
  b.text = world_.text_ptr();
  for (std::size_t c = 0; c < world_.classes(); ++c) b.vocab.names.push_back("class" + std::to_string(c));
  return b;
}

ImageTensor ToyImageWorld::render(std::size_t y, double a_common, double a_unique,
                                  RngStream rng) const {
  if (y >= world_.classes()) throw InvalidArgument("render: class out of range");
  const std::size_t block = spec_.size / 4;
  ImageTensor img(spec_.size, spec_.size);
  for (std::size_t row = 0; row < spec_.size; ++row) {
    for (std::size_t col = 0; col < spec_.size; ++col) {
      const std::size_t local = ((row % block) * block + (col % block)) * ImageTensor::channels;
      const bool centre = in_common_region(row, col);
      const Vector& t = centre ? textures_[0] : textures_[1 + y];
      const double a = centre ? a_common : a_unique;
      for (std::size_t ch = 0; ch < ImageTensor::channels; ++ch) {
        const double v = 0.5 + spec_.texture_amplitude * a * t[local + ch] +
                         spec_.pixel_noise * rng.normal();
        img.at(row, col, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

ProxyResult proxy_reconstruction(const ToyImageWorld& world, const ProxySpec& spec) {
  const ModelBundle models = world.bundle();
  const ContextParams base = world.world().base_context();
  const double beta = world.world().spec().beta;
  const std::size_t c_count = world.world().classes();
  std::vector<EmbeddingVector> tau;
  for (std::size_t c = 0; c < c_count; ++c) tau.push_back(world.world().tau(c, base));

  ProxyResult r;
  for (std::size_t i = 0; i < spec.instances; ++i) {
    RngStream rng = RngStream::derive(spec.seed, i, "proxy");
    const std::size_t y = rng.below(c_count);
    const double a_com = rng.uniform(spec.common_min, spec.common_max);
    const double a_uniq = rng.uniform(spec.unique_min, spec.unique_max);
    const ImageTensor img = world.render(y, a_com, a_uniq, rng.fork("pixels"));
    const EmbeddingVector z = models.visual->encode(img);

    Vector scores(c_count);
    for (std::size_t c = 0; c < c_count; ++c) scores[c] = similarity(z, tau[c], beta);
    std::vector<std::size_t> order = iota_ids(c_count);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const std::vector<std::size_t> top2{order[0], order[1]};
    Matrix text(2, z.dim());
    for (std::size_t k = 0; k < 2; ++k) {
      std::copy(tau[top2[k]].vec().begin(), tau[top2[k]].vec().end(), text.row(k).begin());
    }
    const EvidenceBundle ev = compute_evidence(*models.visual, img, text, top2, beta, spec.evidence,
                                               rng.fork("masks"), kernels::Exec::serial);
    const EmbeddingVector& com = ev.common_embeddings[0];
    const EmbeddingVector u1 = unique_evidence_embedding(*models.visual, img, ev.spatial[0], ev.common[0]);
    const EmbeddingVector u2 = unique_evidence_embedding(*models.visual, img, ev.spatial[1], ev.common[0]);
    Vector sum(z.dim());
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = com[k] + 0.1 * u1[k] + 0.1 * u2[k];
    const double cos_sum = dot(z.values(), sum) / norm(sum);
    const double best = std::max({dot(z.values(), com.values()), dot(z.values(), u1.values()),
                                  dot(z.values(), u2.values())});
    r.cos_sum.push_back(cos_sum);
    r.cos_best_component.push_back(best);
    ++r.instances;
    if (cos_sum > best) ++r.holds;
  }
  return r;
}

EvaluationResult ecec_trend(const ToyImageWorld& world, const TrendSpec& spec) {
  const ModelBundle models = world.bundle();
  const ContextParams base = world.world().base_context();
  EpisodeConfig cfg;
  cfg.augment.views = spec.views;
  cfg.augment.output_size = world.spec().size;
  cfg.evidence.masks = spec.masks;
  cfg.encoder.beta = world.world().spec().beta;
  cfg.encoder.dim = world.world().dim();

  EvaluationResult out;
  for (std::size_t e = 0; e < spec.episodes; ++e) {
    RngStream rng = RngStream::derive(spec.seed, e, "trend");
    const std::size_t y = rng.below(world.world().classes());
    const double a_com = rng.uniform(spec.common_min, spec.common_max);
    const double a_uniq = rng.uniform(spec.unique_min, spec.unique_max);
    const ImageTensor img = world.render(y, a_com, a_uniq, rng.fork("pixels"));
    EpisodeReport rep = run_episode(img, y, cfg, models, base, RngStream::derive(spec.seed, e, "episode"));
    rep.image_id = "trend-" + std::to_string(e);
    out.episodes.push_back(std::move(rep));
  }
  out.outcome = summarize(out.episodes, 0);
  return out;
}

}  // namespace fcl::theory
