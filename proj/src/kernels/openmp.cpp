#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fcl/error.hpp"
#include "fcl/kernels.hpp"

namespace fcl::kernels {

namespace omp {

void score_matrix(const Matrix& embeddings, const Matrix& text, double beta, Matrix& out) {
  if (embeddings.cols() != text.cols()) throw ShapeMismatch("score_matrix: embedding dims differ");
  out = Matrix(embeddings.rows(), text.rows());
  const auto rows = static_cast<std::ptrdiff_t>(embeddings.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto z = embeddings.row(static_cast<std::size_t>(i));
    for (std::size_t c = 0; c < text.rows(); ++c) {
      const auto t = text.row(c);
      double s = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) s += z[k] * t[k];
      out(static_cast<std::size_t>(i), c) = beta * s;
    }
  }
}

void affine_forward(const Matrix& weights, std::span<const double> bias, const Matrix& inputs,
                    Matrix& out) {
  if (weights.cols() != inputs.cols() || bias.size() != weights.rows()) {
    throw ShapeMismatch("affine_forward: weight/input/bias shapes disagree");
  }
  out = Matrix(inputs.rows(), weights.rows());
  // Parallelize over (batch, output-row) pairs so a batch of one still fans out.
  const auto total = static_cast<std::ptrdiff_t>(inputs.rows() * weights.rows());
  const std::size_t out_rows = weights.rows();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const std::size_t b = static_cast<std::size_t>(idx) / out_rows;
    const std::size_t r = static_cast<std::size_t>(idx) % out_rows;
    const auto x = inputs.row(b);
    const auto w = weights.row(r);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += w[k] * x[k];
    out(b, r) = s + bias[r];
  }
}

void weighted_mask_average(std::span<const std::uint8_t> masks, std::span<const double> coeffs,
                           std::size_t pixels, std::span<double> out) {
  if (masks.size() != coeffs.size() * pixels || out.size() != pixels) {
    throw ShapeMismatch("weighted_mask_average: mask/coefficient/output sizes disagree");
  }
  if (coeffs.empty()) throw DegenerateInput("weighted_mask_average: no masks");
  const double inv_n = 1.0 / static_cast<double>(coeffs.size());
  const auto n_pixels = static_cast<std::ptrdiff_t>(pixels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n_pixels; ++p) {
    double s = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
      if (masks[n * pixels + static_cast<std::size_t>(p)]) s += coeffs[n];
    }
    out[static_cast<std::size_t>(p)] = s * inv_n;
  }
}

}  // namespace omp

Exec default_exec() {
  const char* flag = std::getenv("FCL_NO_PARALLEL");
  if (flag != nullptr && std::strcmp(flag, "1") == 0) return Exec::serial;
#ifdef _OPENMP
  if (omp_in_parallel()) return Exec::serial;
  return Exec::parallel;
#else
  return Exec::serial;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void score_matrix(const Matrix& embeddings, const Matrix& text, double beta, Matrix& out,
                  Exec exec) {
  if (exec == Exec::parallel) {
    omp::score_matrix(embeddings, text, beta, out);
  } else {
    reference::score_matrix(embeddings, text, beta, out);
  }
}

void affine_forward(const Matrix& weights, std::span<const double> bias, const Matrix& inputs,
                    Matrix& out, Exec exec) {
  if (exec == Exec::parallel) {
    omp::affine_forward(weights, bias, inputs, out);
  } else {
    reference::affine_forward(weights, bias, inputs, out);
  }
}

void weighted_mask_average(std::span<const std::uint8_t> masks, std::span<const double> coeffs,
                           std::size_t pixels, std::span<double> out, Exec exec) {
  if (exec == Exec::parallel) {
    omp::weighted_mask_average(masks, coeffs, pixels, out);
  } else {
    reference::weighted_mask_average(masks, coeffs, pixels, out);
  }
}

}  // namespace fcl::kernels
