#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "fcl/error.hpp"
#include "fcl/numerics.hpp"

using namespace fcl;

TEST_CASE("softmax of equal scores is uniform") {
  const ProbDist p = softmax(Vector{3.0, 3.0, 3.0, 3.0});
  for (double x : p.probs()) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant and survives large scores") {
  const ProbDist a = softmax(Vector{1.0, 2.0, 3.0});
  const ProbDist b = softmax(Vector{1001.0, 1002.0, 1003.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  CHECK_THROWS_AS(softmax(Vector{1.0, NAN}), NonFinite);
  CHECK_THROWS_AS(softmax(Vector{}), DegenerateInput);
}

TEST_CASE("log_softmax matches log of softmax") {
  const Vector s{-2.0, 0.5, 4.0, 1.0};
  const Vector l = log_softmax(s);
  const ProbDist p = softmax(s);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(l[i] == doctest::Approx(std::log(p[i])));
}

TEST_CASE("ProbDist validates its entries") {
  CHECK_NOTHROW(ProbDist::from_probs({0.25, 0.75}));
  CHECK_THROWS_AS(ProbDist::from_probs({0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(ProbDist::from_probs({-0.1, 1.1}), InvalidArgument);
  CHECK_THROWS_AS(ProbDist::from_probs({}), InvalidArgument);
}

TEST_CASE("entropy bounds") {
  CHECK(entropy(ProbDist::uniform(8)) == doctest::Approx(std::log(8.0)));
  CHECK(entropy(ProbDist::from_probs({1.0, 0.0, 0.0})) == 0.0);
}

TEST_CASE("KL and JS against hand-computed values") {
  const ProbDist p = ProbDist::from_probs({0.2, 0.5, 0.3});
  const ProbDist q = ProbDist::from_probs({0.1, 0.1, 0.8});
  CHECK(kl_divergence(p, q) == doctest::Approx(0.6490996164255214).epsilon(1e-12));
  CHECK(js_divergence(p, q) == doctest::Approx(0.140227752588879).epsilon(1e-12));
  CHECK(js_divergence(p, p) == doctest::Approx(0.0));
  const ProbDist a = ProbDist::from_probs({1.0, 0.0});
  const ProbDist b = ProbDist::from_probs({0.0, 1.0});
  CHECK(js_divergence(a, b) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(kl_divergence(a, b)));
}

TEST_CASE("l2_normalize") {
  const Vector v = l2_normalize(Vector{3.0, 4.0});
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
  CHECK_THROWS_AS(l2_normalize(Vector{0.0, 0.0}), DegenerateInput);
}

TEST_CASE("AdamW first step moves each parameter by the learning rate") {
  Vector params{1.0, -2.0, 0.5};
  const Vector grads{0.3, -4.0, 1e-3};
  AdamWState state(3, AdamWOptions{});
  adamw_step(params, grads, state);
  // Bias-corrected first step: m̂ = g, v̂ = g², update = lr * g / (|g| + eps).
  CHECK(params[0] == doctest::Approx(1.0 - 0.002 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(params[1] == doctest::Approx(-2.0 + 0.002 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(params[2] == doctest::Approx(0.5 - 0.002 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-14));
  CHECK(state.step_count == 1);
}

TEST_CASE("AdamW second step against a hand-rolled recurrence") {
  AdamWOptions o;
  o.weight_decay = 0.01;
  Vector params{0.7};
  AdamWState state(1, o);
  const double g1 = 0.5, g2 = -0.2;
  adamw_step(params, Vector{g1}, state);
  adamw_step(params, Vector{g2}, state);

  double p = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    p -= 0.002 * 0.01 * p;
    p -= 0.002 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(params[0] == doctest::Approx(p).epsilon(1e-14));
  CHECK_THROWS_AS(adamw_step(params, Vector{NAN}, state), NonFinite);
  CHECK_THROWS_AS(adamw_step(params, Vector{1.0, 2.0}, state), ShapeMismatch);
}

TEST_CASE("RngStream is a pure function of seed, stream and counter") {
  RngStream a(5, 9);
  RngStream b(5, 9);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(5, 10);
  RngStream d(5, 9);
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("RngStream forks do not advance the parent and differ by key") {
  RngStream parent = RngStream::derive(1, 2, "views");
  const std::uint64_t before = parent.counter();
  RngStream f1 = parent.fork(1);
  RngStream f1b = parent.fork(1);
  RngStream f2 = parent.fork(2);
  CHECK(parent.counter() == before);
  const std::uint64_t x = f1.next_u64();
  CHECK(x == f1b.next_u64());
  CHECK(x != f2.next_u64());
  CHECK(RngStream::derive(1, 2, "views").next_u64() != RngStream::derive(1, 2, "masks").next_u64());
}

TEST_CASE("RngStream distributions") {
  RngStream r(3, 4);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  std::set<std::uint64_t> seen;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
    const std::uint64_t k = r.below(7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("stable_hash is FNV-1a") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("average ranks share ties") {
  const Vector r = average_ranks(Vector{3.0, 1.0, 3.0, 2.0});
  CHECK(r == Vector{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("pearson and spearman against reference values") {
  const Vector x{1, 2, 3, 4, 5.5};
  const Vector y{2, 1, 4, 3, 7};
  CHECK(*pearson(x, y) == doctest::Approx(0.8580868382401787).epsilon(1e-12));
  CHECK(*spearman(x, y) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_FALSE(pearson(Vector{1, 1, 1}, Vector{1, 2, 3}).has_value());
  CHECK_FALSE(spearman(Vector{1}, Vector{2}).has_value());
}

TEST_CASE("Mann-Whitney U against reference values") {
  const Vector a{1.2, 3.4, 2.2, 5.0, 0.7};
  const Vector b{2.9, 6.1, 4.4, 7.3, 5.5, 3.3};
  const RankTestResult r = mann_whitney_u(a, b);
  CHECK(r.u == doctest::Approx(5.0));
  CHECK(r.p_two_sided == doctest::Approx(0.0828374251588063).epsilon(1e-12));

  const RankTestResult t = mann_whitney_u(Vector{1, 2, 2, 3, 3, 3}, Vector{2, 3, 4, 4, 5});
  CHECK(t.u == doctest::Approx(5.5));
  CHECK(t.p_two_sided == doctest::Approx(0.08871369199677616).epsilon(1e-12));

  CHECK(mann_whitney_u(Vector{1, 1}, Vector{1, 1}).p_two_sided == 1.0);
  CHECK_THROWS_AS(mann_whitney_u(Vector{}, Vector{1}), DegenerateInput);
}
