#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "fcl/kernels.hpp"

using namespace fcl;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t stream) {
  RngStream rng(11, stream);
  Matrix m(r, c);
  for (double& v : m.flat()) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("score_matrix: OpenMP matches the serial reference bit for bit") {
  const Matrix e = random_matrix(37, 29, 1);
  const Matrix t = random_matrix(53, 29, 2);
  Matrix a, b;
  kernels::reference::score_matrix(e, t, 20.0, a);
  kernels::omp::score_matrix(e, t, 20.0, b);
  CHECK(a == b);
  CHECK(a.rows() == 37);
  CHECK(a.cols() == 53);
  double s = 0.0;
  for (std::size_t k = 0; k < 29; ++k) s += e(3, k) * t(7, k);
  CHECK(a(3, 7) == doctest::Approx(20.0 * s).epsilon(1e-14));
}

TEST_CASE("affine_forward: OpenMP matches the serial reference bit for bit") {
  const Matrix w = random_matrix(17, 300, 3);
  const Matrix x = random_matrix(9, 300, 4);
  std::vector<double> bias(17);
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = 0.1 * static_cast<double>(i);
  Matrix a, b;
  kernels::reference::affine_forward(w, bias, x, a);
  kernels::omp::affine_forward(w, bias, x, b);
  CHECK(a == b);
  double s = bias[5];
  for (std::size_t k = 0; k < 300; ++k) s += w(5, k) * x(2, k);
  CHECK(a(2, 5) == doctest::Approx(s).epsilon(1e-13));
}

TEST_CASE("weighted_mask_average: OpenMP matches the serial reference bit for bit") {
  RngStream rng(11, 5);
  const std::size_t n = 57, pixels = 1031;
  std::vector<std::uint8_t> masks(n * pixels);
  for (auto& m : masks) m = rng.bernoulli(0.5) ? 1 : 0;
  std::vector<double> coeffs(n);
  for (double& c : coeffs) c = rng.normal();
  std::vector<double> a(pixels), b(pixels);
  kernels::reference::weighted_mask_average(masks, coeffs, pixels, a);
  kernels::omp::weighted_mask_average(masks, coeffs, pixels, b);
  CHECK(a == b);
  std::vector<double> c(pixels);
  kernels::weighted_mask_average(masks, coeffs, pixels, c, kernels::Exec::serial);
  CHECK(a == c);
}

TEST_CASE("FCL_NO_PARALLEL forces serial execution") {
  ::setenv("FCL_NO_PARALLEL", "1", 1);
  CHECK(kernels::default_exec() == kernels::Exec::serial);
  ::unsetenv("FCL_NO_PARALLEL");
  CHECK(kernels::max_threads() >= 1);
}
