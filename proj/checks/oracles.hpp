#pragma once

// Brute-force reference implementations used by the property suites. They
// share no code with the engine beyond plain data types.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fcl/evidence.hpp"
#include "fcl/explore.hpp"
#include "fcl/numerics.hpp"

namespace fcl::oracle {

/// Softmax in long double.
std::vector<long double> softmax(std::span<const double> scores);
long double entropy_of_scores(std::span<const double> scores);

/// Sort all views by (entropy, index) with a selection sort and keep
/// max(1, floor(rho * N)).
std::vector<std::size_t> filter_low_entropy(const Matrix& scores, double rho);

struct Tally {
  std::vector<long double> fractions;
  std::vector<long double> mean_probs;
};

Tally vote(const Matrix& scores, const std::vector<std::size_t>& retained, Aggregation aggregation);

/// Class ids of the top min(K, C) classes: repeatedly extracts the best
/// remaining class by (fraction, mean prob, -class id).
std::vector<std::size_t> explore_topk(const Matrix& scores, const std::vector<std::size_t>& class_ids,
                                      double rho, std::size_t k, Aggregation aggregation);

/// Block of a g-way split of `extent` pixels that contains `pos`, found by
/// scanning every block edge.
std::size_t cell_of(std::size_t pos, std::size_t extent, std::size_t grid);

/// Occlusion map of a cell list, pixel by pixel.
std::vector<std::uint8_t> rasterize(std::size_t grid, const std::vector<std::size_t>& cells,
                                    std::size_t height, std::size_t width);

/// E(p) = (1/N) Σ_n coeffs[n] M_n(p), pixel-outer loop.
std::vector<double> class_evidence(const std::vector<MaskSpec>& masks,
                                   const std::vector<double>& coeffs);

std::vector<long double> spatial_softmax(const std::vector<double>& e);

/// Q = S_i S_j / Σ S_i S_j.
std::vector<long double> common_map(std::span<const double> s_i, std::span<const double> s_j);

/// 1 / (1 + (C - 1) exp(-m)) recomputed from scratch in long double.
long double bound(std::span<const double> scores, std::size_t i);

}  // namespace fcl::oracle
