#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fcl/evidence.hpp"
#include "fcl/explore.hpp"
#include "oracles.hpp"

using namespace fcl;

TEST_CASE("oracle cell_of agrees with block_start") {
  for (std::size_t extent : {7u, 10u, 24u, 224u}) {
    for (std::size_t grid : {2u, 3u, 7u}) {
      for (std::size_t b = 0; b < grid; ++b) {
        for (std::size_t pos = block_start(b, extent, grid); pos < block_start(b + 1, extent, grid); ++pos) {
          CHECK(oracle::cell_of(pos, extent, grid) == b);
        }
      }
    }
  }
}

TEST_CASE("oracle rasterization matches make_mask") {
  const std::vector<std::size_t> cells{0, 4, 5, 8};
  CHECK(oracle::rasterize(3, cells, 10, 13) == make_mask(3, cells, 10, 13).pixels);
}

TEST_CASE("oracle softmax and entropy") {
  const std::vector<double> s{1.0, 2.0, 3.0};
  const auto p = oracle::softmax(s);
  CHECK(static_cast<double>(std::accumulate(p.begin(), p.end(), 0.0L)) == doctest::Approx(1.0));
  CHECK(static_cast<double>(oracle::entropy_of_scores(std::vector<double>{0.0, 0.0})) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("oracle selection matches the engine on a small instance") {
  ScoreMatrix sm;
  sm.scores = Matrix(4, 3);
  const double rows[4][3] = {{2, 0, 0}, {0, 0, 0}, {0, 5, 1}, {0, 3, 0}};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) sm.scores(i, c) = rows[i][c];
  }
  sm.class_ids = {4, 5, 6};
  CHECK(oracle::filter_low_entropy(sm.scores, 0.5) == filter_low_entropy(sm, 0.5));
  ExploreConfig cfg;
  cfg.rho = 0.75;
  cfg.top_k = 2;
  CHECK(oracle::explore_topk(sm.scores, sm.class_ids, 0.75, 2, Aggregation::voting) ==
        explore_topk(sm, cfg).class_ids);
}

TEST_CASE("oracle common map is normalized") {
  const std::vector<double> a{0.1, 0.2, 0.7};
  const std::vector<double> b{0.5, 0.25, 0.25};
  const auto q = oracle::common_map(a, b);
  CHECK(static_cast<double>(q[0]) == doctest::Approx(0.05 / 0.275));
  CHECK(static_cast<double>(q[2]) == doctest::Approx(0.175 / 0.275));
}
