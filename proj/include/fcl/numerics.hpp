#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fcl {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A categorical distribution: entries in [0,1] summing to one within 1e-9.
class ProbDist {
public:
  /// Validates and wraps `probs`. Throws InvalidArgument when the entries
  /// are out of range or do not sum to one within `tolerance`.
  static ProbDist from_probs(Vector probs, double tolerance = 1e-9);
  static ProbDist uniform(std::size_t n);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const Vector& probs() const noexcept { return probs_; }

private:
  explicit ProbDist(Vector p) : probs_(std::move(p)) {}
  Vector probs_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

/// Unit-norm copy of `v`. Throws DegenerateInput on a zero vector.
Vector l2_normalize(std::span<const double> v);

double log_sum_exp(std::span<const double> scores);
Vector log_softmax(std::span<const double> scores);
/// Max-subtracted softmax. Throws NonFinite on NaN/Inf input.
ProbDist softmax(std::span<const double> scores);

/// Shannon entropy in nats; 0·ln 0 is taken as 0.
double entropy(const ProbDist& p);
double kl_divergence(const ProbDist& p, const ProbDist& q);
/// Jensen–Shannon divergence in nats, bounded by ln 2.
double js_divergence(const ProbDist& p, const ProbDist& q);

// ---------------------------------------------------------------------------
// AdamW

struct AdamWOptions {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  AdamWState(std::size_t parameter_count, AdamWOptions opts)
      : first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0), options(opts) {}

  std::uint64_t step_count = 0;
  Vector first_moment;
  Vector second_moment;
  AdamWOptions options;
};

/// One decoupled-weight-decay Adam update in place (bias-corrected moments).
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state);

// ---------------------------------------------------------------------------
// Random numbers

/// 64-bit FNV-1a. Stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text);

/// Counter-based generator: draw i is a pure function of (seed, stream, i),
/// so any number of streams can be consumed in any order or in parallel
/// without changing each other's values.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Stream keyed by (global seed, episode id, purpose tag).
  static RngStream derive(std::uint64_t seed, std::uint64_t episode, std::string_view purpose);

  /// Child stream keyed additionally by `index`; does not advance this one.
  RngStream fork(std::uint64_t index) const;
  RngStream fork(std::string_view purpose) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p);

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Small statistics helpers

/// Average ranks (1-based), ties share the mean rank.
Vector average_ranks(std::span<const double> values);
/// Empty when either side has zero variance or fewer than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct RankTestResult {
  double u = 0.0;           ///< U statistic of the first sample
  double z = 0.0;           ///< tie-corrected normal approximation
  double p_two_sided = 1.0;
};

/// Mann–Whitney U (Wilcoxon rank-sum) test, normal approximation with tie
/// correction and continuity correction. Throws DegenerateInput if a sample
/// is empty.
RankTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);

}  // namespace fcl
