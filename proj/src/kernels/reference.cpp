#include "fcl/error.hpp"
#include "fcl/kernels.hpp"

namespace fcl::kernels::reference {

void score_matrix(const Matrix& embeddings, const Matrix& text, double beta, Matrix& out) {
  if (embeddings.cols() != text.cols()) throw ShapeMismatch("score_matrix: embedding dims differ");
  out = Matrix(embeddings.rows(), text.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto z = embeddings.row(i);
    for (std::size_t c = 0; c < text.rows(); ++c) {
      const auto t = text.row(c);
      double s = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) s += z[k] * t[k];
      out(i, c) = beta * s;
    }
  }
}

void affine_forward(const Matrix& weights, std::span<const double> bias, const Matrix& inputs,
                    Matrix& out) {
  if (weights.cols() != inputs.cols() || bias.size() != weights.rows()) {
    throw ShapeMismatch("affine_forward: weight/input/bias shapes disagree");
  }
  out = Matrix(inputs.rows(), weights.rows());
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    const auto x = inputs.row(b);
    for (std::size_t r = 0; r < weights.rows(); ++r) {
      const auto w = weights.row(r);
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) s += w[k] * x[k];
      out(b, r) = s + bias[r];
    }
  }
}

void weighted_mask_average(std::span<const std::uint8_t> masks, std::span<const double> coeffs,
                           std::size_t pixels, std::span<double> out) {
  if (masks.size() != coeffs.size() * pixels || out.size() != pixels) {
    throw ShapeMismatch("weighted_mask_average: mask/coefficient/output sizes disagree");
  }
  if (coeffs.empty()) throw DegenerateInput("weighted_mask_average: no masks");
  const double inv_n = 1.0 / static_cast<double>(coeffs.size());
  for (std::size_t p = 0; p < pixels; ++p) {
    double s = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
      if (masks[n * pixels + p]) s += coeffs[n];
    }
    out[p] = s * inv_n;
  }
}

}  // namespace fcl::kernels::reference
