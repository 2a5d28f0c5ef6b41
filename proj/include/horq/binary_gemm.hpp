#pragma once

#include <cstddef>

#include "horq/binary_plane.hpp"
#include "horq/errors.hpp"
#include "horq/quantize.hpp"
#include "horq/tensor.hpp"

namespace horq {

/// Product of per-row first-order weights with per-column order-K inputs.
/// Entry (o, c) is alpha_o * sum_i beta_{i,c} * xnor_dot(B_o, H_{i,c}): every
/// bit-level dot is an exact integer, and the scale combination runs in double
/// with a fixed order (terms first, row scale last) so results are
/// reproducible across runs.
inline Matrix binary_gemm(const QuantizedMatrix& weights, const QuantizedMatrix& inputs) {
  if (weights.orientation != Orientation::PerRow)
    throw ShapeError("binary_gemm: weights must be quantized per row");
  if (inputs.orientation != Orientation::PerColumn)
    throw ShapeError("binary_gemm: inputs must be quantized per column");
  if (weights.codes.empty() || inputs.codes.empty())
    throw DomainError("binary_gemm: empty operand");
  if (weights.cols != inputs.rows)
    throw ShapeError("binary_gemm: inner dimensions disagree");

  Matrix out(weights.rows, inputs.cols);
  for (std::size_t o = 0; o < weights.rows; ++o) {
    const ScaledPlane& w = weights.codes[o].terms.front();
    for (std::size_t c = 0; c < inputs.cols; ++c) {
      const HorqCode& x = inputs.codes[c];
      double acc = 0.0;
      for (const ScaledPlane& term : x.terms)
        acc += static_cast<double>(term.beta) *
               static_cast<double>(xnor_dot(w.plane, term.plane));
      out.at(o, c) = static_cast<float>(static_cast<double>(w.beta) * acc);
    }
  }
  return out;
}

}  // namespace horq
