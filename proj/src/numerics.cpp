#include "fcl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fcl/error.hpp"

namespace fcl {

ProbDist ProbDist::from_probs(Vector probs, double tolerance) {
  if (probs.empty()) throw InvalidArgument("probability vector is empty");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw InvalidArgument("probability entry outside [0,1]: " + std::to_string(p));
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tolerance) {
    throw InvalidArgument("probabilities sum to " + std::to_string(total));
  }
  return ProbDist(std::move(probs));
}

ProbDist ProbDist::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform distribution over zero outcomes");
  return ProbDist(Vector(n, 1.0 / static_cast<double>(n)));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector l2_normalize(std::span<const double> v) {
  if (!all_finite(v)) throw NonFinite("l2_normalize: non-finite input");
  const double n = norm(v);
  if (!(n > 0.0)) throw DegenerateInput("l2_normalize: zero-norm vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double log_sum_exp(std::span<const double> scores) {
  if (scores.empty()) throw DegenerateInput("log_sum_exp of empty vector");
  if (!all_finite(scores)) throw NonFinite("log_sum_exp: non-finite score");
  const double m = *std::max_element(scores.begin(), scores.end());
  double s = 0.0;
  for (double x : scores) s += std::exp(x - m);
  return m + std::log(s);
}

Vector log_softmax(std::span<const double> scores) {
  const double lse = log_sum_exp(scores);
  Vector out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

ProbDist softmax(std::span<const double> scores) {
  if (scores.empty()) throw DegenerateInput("softmax of empty vector");
  if (!all_finite(scores)) throw NonFinite("softmax: non-finite score");
  const double m = *std::max_element(scores.begin(), scores.end());
  Vector p(scores.size());
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    s += p[i];
  }
  for (double& x : p) x /= s;
  return ProbDist::from_probs(std::move(p));
}

double entropy(const ProbDist& p) {
  double h = 0.0;
  for (double x : p.probs()) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}

double kl_divergence(const ProbDist& p, const ProbDist& q) {
  if (p.size() != q.size()) throw ShapeMismatch("kl_divergence: outcome count mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

double js_divergence(const ProbDist& p, const ProbDist& q) {
  if (p.size() != q.size()) throw ShapeMismatch("js_divergence: outcome count mismatch");
  // Each outcome contributes ½[p ln(p/m) + q ln(q/m)]; m > 0 whenever either
  // side is positive, so zero-probability outcomes never divide by zero.
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) d += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) d += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(d, 0.0, std::log(2.0));
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeMismatch("adamw_step: parameter/gradient/state shapes disagree");
  }
  if (!all_finite(grads)) throw NonFinite("adamw_step: non-finite gradient");

  const AdamWOptions& o = state.options;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(o.beta1, t);
  const double bias2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= o.learning_rate * o.weight_decay * params[i];
    params[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), key_(mix64(mix64(seed + kGolden) ^ (stream_id * 0xD1B54A32D192ED03ULL))) {}

RngStream RngStream::derive(std::uint64_t seed, std::uint64_t episode, std::string_view purpose) {
  return RngStream(seed, mix64(episode + kGolden) ^ stable_hash(purpose));
}

RngStream RngStream::fork(std::uint64_t index) const {
  return RngStream(seed_, mix64(stream_ ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL)));
}

RngStream RngStream::fork(std::string_view purpose) const {
  return RngStream(seed_, mix64(stream_ ^ stable_hash(purpose)));
}

std::uint64_t RngStream::next_u64() {
  counter_ += 1;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("RngStream::below(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

// ---------------------------------------------------------------------------

double mean(std::span<const double> v) {
  if (v.empty()) throw DegenerateInput("mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Vector average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  Vector ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeMismatch("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeMismatch("spearman: length mismatch");
  const Vector rx = average_ranks(x);
  const Vector ry = average_ranks(y);
  return pearson(rx, ry);
}

RankTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DegenerateInput("mann_whitney_u: empty sample");
  Vector pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const Vector ranks = average_ranks(pooled);

  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double r1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r1 += ranks[i];

  RankTestResult out;
  out.u = r1 - n1 * (n1 + 1.0) / 2.0;

  // Tie correction: Σ (t³ - t) over groups of tied values.
  Vector sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    out.z = 0.0;
    out.p_two_sided = 1.0;
    return out;
  }
  double diff = out.u - mu;
  if (diff > 0.5) {
    diff -= 0.5;
  } else if (diff < -0.5) {
    diff += 0.5;
  } else {
    diff = 0.0;
  }
  out.z = diff / std::sqrt(var);
  out.p_two_sided = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  return out;
}

}  // namespace fcl
