#include "oracles.hpp"

#include <cmath>
#include <limits>

namespace fcl::oracle {

std::vector<long double> softmax(std::span<const double> scores) {
  long double hi = -std::numeric_limits<long double>::infinity();
  for (double s : scores) hi = std::max<long double>(hi, s);
  std::vector<long double> out(scores.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(static_cast<long double>(scores[i]) - hi);
    total += out[i];
  }
  for (long double& v : out) v /= total;
  return out;
}

long double entropy_of_scores(std::span<const double> scores) {
  long double h = 0.0L;
  for (long double p : softmax(scores)) {
    if (p > 0.0L) h -= p * std::log(p);
  }
  return h;
}

std::vector<std::size_t> filter_low_entropy(const Matrix& scores, double rho) {
  const std::size_t n = scores.rows();
  std::vector<long double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = entropy_of_scores(scores.row(i));
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> order;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || h[i] < h[best]) best = i;
    }
    taken[best] = true;
    order.push_back(best);
  }
  std::size_t keep = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n)));
  if (keep < 1) keep = 1;
  if (keep > n) keep = n;
  order.resize(keep);
  return order;
}

Tally vote(const Matrix& scores, const std::vector<std::size_t>& retained, Aggregation aggregation) {
  const std::size_t c = scores.cols();
  Tally t;
  t.fractions.assign(c, 0.0L);
  t.mean_probs.assign(c, 0.0L);
  for (std::size_t v : retained) {
    const auto row = scores.row(v);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    const auto p = softmax(row);
    for (std::size_t j = 0; j < c; ++j) t.mean_probs[j] += p[j];
    t.fractions[arg] += 1.0L;
  }
  const long double n = static_cast<long double>(retained.size());
  for (std::size_t j = 0; j < c; ++j) {
    t.mean_probs[j] /= n;
    t.fractions[j] = aggregation == Aggregation::voting ? t.fractions[j] / n : t.mean_probs[j];
  }
  return t;
}

std::vector<std::size_t> explore_topk(const Matrix& scores, const std::vector<std::size_t>& class_ids,
                                      double rho, std::size_t k, Aggregation aggregation) {
  const Tally t = vote(scores, filter_low_entropy(scores, rho), aggregation);
  std::vector<bool> taken(class_ids.size(), false);
  std::vector<std::size_t> out;
  const std::size_t keep = std::min(k, class_ids.size());
  for (std::size_t step = 0; step < keep; ++step) {
    std::size_t best = class_ids.size();
    for (std::size_t j = 0; j < class_ids.size(); ++j) {
      if (taken[j]) continue;
      if (best == class_ids.size()) {
        best = j;
        continue;
      }
      const bool better =
          t.fractions[j] > t.fractions[best] ||
          (t.fractions[j] == t.fractions[best] &&
           (t.mean_probs[j] > t.mean_probs[best] ||
            (t.mean_probs[j] == t.mean_probs[best] && class_ids[j] < class_ids[best])));
      if (better) best = j;
    }
    taken[best] = true;
    out.push_back(class_ids[best]);
  }
  return out;
}

std::size_t cell_of(std::size_t pos, std::size_t extent, std::size_t grid) {
  std::size_t cell = 0;
  for (std::size_t b = 0; b < grid; ++b) {
    // pos >= floor(b * extent / g) exactly when (pos + 1) * g > b * extent.
    if ((pos + 1) * grid > b * extent) cell = b;
  }
  return cell;
}

std::vector<std::uint8_t> rasterize(std::size_t grid, const std::vector<std::size_t>& cells,
                                    std::size_t height, std::size_t width) {
  std::vector<std::uint8_t> out(height * width, 0);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t id = cell_of(r, height, grid) * grid + cell_of(c, width, grid);
      for (std::size_t cell : cells) {
        if (cell == id) out[r * width + c] = 1;
      }
    }
  }
  return out;
}

std::vector<double> class_evidence(const std::vector<MaskSpec>& masks,
                                   const std::vector<double>& coeffs) {
  const std::size_t pixels = masks.front().height * masks.front().width;
  std::vector<double> out(pixels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    double acc = 0.0;
    for (std::size_t n = 0; n < masks.size(); ++n) {
      if (masks[n].pixels[p] != 0) acc += coeffs[n];
    }
    out[p] = acc / static_cast<double>(masks.size());
  }
  return out;
}

std::vector<long double> spatial_softmax(const std::vector<double>& e) { return softmax(e); }

std::vector<long double> common_map(std::span<const double> s_i, std::span<const double> s_j) {
  std::vector<long double> q(s_i.size());
  long double total = 0.0L;
  for (std::size_t p = 0; p < q.size(); ++p) {
    q[p] = static_cast<long double>(s_i[p]) * static_cast<long double>(s_j[p]);
    total += q[p];
  }
  for (long double& v : q) v /= total;
  return q;
}

long double bound(std::span<const double> scores, std::size_t i) {
  long double best = -std::numeric_limits<long double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != i) best = std::max<long double>(best, scores[j]);
  }
  const long double m = static_cast<long double>(scores[i]) - best;
  return 1.0L / (1.0L + static_cast<long double>(scores.size() - 1) * std::exp(-m));
}

}  // namespace fcl::oracle
