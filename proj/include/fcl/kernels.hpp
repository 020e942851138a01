#pragma once

// Data-parallel inner loops. Every kernel has a serial reference version and
// an OpenMP version; both compute each output element with the same
// summation order, so their results are bit-identical and tests compare them
// with exact equality.

#include <cstddef>
#include <cstdint>
#include <span>

#include "fcl/numerics.hpp"

namespace fcl::kernels {

enum class Exec { serial, parallel };

/// `parallel` unless FCL_NO_PARALLEL=1 is set or we are already inside an
/// OpenMP parallel region (nested regions run serially).
Exec default_exec();

/// Number of OpenMP threads a parallel kernel would use (1 without OpenMP).
int max_threads();

/// out(i, c) = beta * <embeddings.row(i), text.row(c)>.
void score_matrix(const Matrix& embeddings, const Matrix& text, double beta, Matrix& out,
                  Exec exec = default_exec());

/// out(b, :) = weights * inputs.row(b) + bias.
void affine_forward(const Matrix& weights, std::span<const double> bias, const Matrix& inputs,
                    Matrix& out, Exec exec = default_exec());

/// out[p] = (1/N) * sum_n coeffs[n] * masks[n * pixels + p], n in [0, N).
void weighted_mask_average(std::span<const std::uint8_t> masks, std::span<const double> coeffs,
                           std::size_t pixels, std::span<double> out, Exec exec = default_exec());

namespace reference {
void score_matrix(const Matrix& embeddings, const Matrix& text, double beta, Matrix& out);
void affine_forward(const Matrix& weights, std::span<const double> bias, const Matrix& inputs,
                    Matrix& out);
void weighted_mask_average(std::span<const std::uint8_t> masks, std::span<const double> coeffs,
                           std::size_t pixels, std::span<double> out);
}  // namespace reference

namespace omp {
void score_matrix(const Matrix& embeddings, const Matrix& text, double beta, Matrix& out);
void affine_forward(const Matrix& weights, std::span<const double> bias, const Matrix& inputs,
                    Matrix& out);
void weighted_mask_average(std::span<const std::uint8_t> masks, std::span<const double> coeffs,
                           std::size_t pixels, std::span<double> out);
}  // namespace omp

}  // namespace fcl::kernels
