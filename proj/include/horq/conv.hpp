#pragma once

#include <cstddef>
#include <vector>

#include "horq/binary_gemm.hpp"
#include "horq/errors.hpp"
#include "horq/quantize.hpp"
#include "horq/tensor.hpp"

namespace horq {

/// Direct float convolution, the accuracy reference. Accumulates each output
/// element in double over the full receptive field; zero padding contributes
/// exact zeros. Axis conventions mirror im2col: spatial axes ordered (w, h).
inline Tensor conv_float(const Tensor& input, const Tensor& weights,
                         std::size_t stride, std::size_t pad) {
  const ConvGeometry g = ConvGeometry::infer(input, weights, stride, pad);
  std::vector<float> out(g.c_out * g.out_positions());
  for (std::size_t f = 0; f < g.c_out; ++f)
    for (std::size_t o1 = 0; o1 < g.out_w; ++o1)
      for (std::size_t o2 = 0; o2 < g.out_h; ++o2) {
        double acc = 0.0;
        for (std::size_t c = 0; c < g.c_in; ++c)
          for (std::size_t k1 = 0; k1 < g.filter_w; ++k1)
            for (std::size_t k2 = 0; k2 < g.filter_h; ++k2) {
              const std::ptrdiff_t i1 = static_cast<std::ptrdiff_t>(o1 * g.stride + k1) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              const std::ptrdiff_t i2 = static_cast<std::ptrdiff_t>(o2 * g.stride + k2) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (i1 < 0 || i2 < 0 || i1 >= static_cast<std::ptrdiff_t>(g.in_w) ||
                  i2 >= static_cast<std::ptrdiff_t>(g.in_h))
                continue;
              acc += static_cast<double>(input.at(c, static_cast<std::size_t>(i1),
                                                  static_cast<std::size_t>(i2))) *
                     static_cast<double>(weights.at(f, c, k1, k2));
            }
        out[(f * g.out_w + o1) * g.out_h + o2] = static_cast<float>(acc);
      }
  return Tensor({g.c_out, g.out_w, g.out_h}, std::move(out));
}

/// Binary convolution: im2col the input, quantize patches per column at the
/// requested order, quantize each filter row first-order, multiply with the
/// XNOR kernel, and fold the result back to (c_out, out_w, out_h).
inline Tensor conv_horq(const Tensor& input, const Tensor& weights,
                        std::size_t stride, std::size_t pad, std::size_t order) {
  const ConvGeometry g = ConvGeometry::infer(input, weights, stride, pad);
  const Matrix patches = im2col(input, g);
  const QuantizedMatrix qx = quantize_input(patches, order);
  const QuantizedMatrix qw = quantize_weights(reshape_weight(weights));
  return reshape_output(binary_gemm(qw, qx), g);
}

/// Fully connected layer as the degenerate one-column case: weights per-row
/// first-order, the single input vector order-K.
inline std::vector<float> fc_horq(const Matrix& weights, std::span<const float> x,
                                  std::size_t order) {
  if (x.size() != weights.cols())
    throw ShapeError("fc_horq: input length does not match weight columns");
  Matrix col(x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) col.at(i, 0) = x[i];
  const Matrix y = binary_gemm(quantize_weights(weights), quantize_input(col, order));
  std::vector<float> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) out[i] = y.at(i, 0);
  return out;
}

}  // namespace horq
