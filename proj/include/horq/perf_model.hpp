#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "horq/binary_gemm.hpp"
#include "horq/errors.hpp"
#include "horq/quantize.hpp"
#include "horq/tensor.hpp"

namespace horq {

/// Inputs of the analytical acceleration model. word_width is the number of
/// binary operations one processor word carries per cycle.
struct SpeedupQuery {
  std::size_t c_in = 0, c_out = 0, w = 0, h = 0;
  std::size_t order = 1;
  std::size_t word_width = 64;
};

/// Predicted acceleration from replacing float multiply-accumulates with
/// word-parallel binary operations:
///   eta = W * c_out*c_in*w*h / (K * c_out*c_in*w*h + W * (K + 1)).
/// Input width and height cancel out of the ratio and do not appear.
inline double speedup_ratio(const SpeedupQuery& q) {
  if (q.c_in == 0 || q.c_out == 0 || q.w == 0 || q.h == 0 || q.order == 0 ||
      q.word_width == 0)
    throw DomainError("speedup_ratio: all query fields must be positive");
  const double np = static_cast<double>(q.c_out) * static_cast<double>(q.c_in) *
                    static_cast<double>(q.w) * static_cast<double>(q.h);
  const double ww = static_cast<double>(q.word_width);
  const double k = static_cast<double>(q.order);
  return ww * np / (k * np + ww * (k + 1.0));
}

/// One sweep sample: the varied parameter's value and the resulting ratio.
struct SweepRow {
  std::size_t value = 0;
  double eta = 0.0;
};

/// Ratio as a function of order K = 1..k_max, everything else fixed.
inline std::vector<SweepRow> sweep_order(SpeedupQuery base, std::size_t k_max) {
  if (k_max < 1) throw DomainError("sweep_order: empty range");
  std::vector<SweepRow> rows;
  rows.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    base.order = k;
    rows.push_back({k, speedup_ratio(base)});
  }
  return rows;
}

/// Ratio as a function of square filter side, channels fixed at 10 x 10.
inline std::vector<SweepRow> sweep_filter(std::span<const std::size_t> sides,
                                          std::size_t order,
                                          std::size_t word_width = 64) {
  if (sides.empty()) throw DomainError("sweep_filter: empty range");
  std::vector<SweepRow> rows;
  rows.reserve(sides.size());
  for (std::size_t s : sides)
    rows.push_back({s, speedup_ratio({10, 10, s, s, order, word_width})});
  return rows;
}

/// Ratio as a function of output channels, 3 x 3 filters over 3 input channels.
inline std::vector<SweepRow> sweep_channels(std::span<const std::size_t> c_outs,
                                            std::size_t order,
                                            std::size_t word_width = 64) {
  if (c_outs.empty()) throw DomainError("sweep_channels: empty range");
  std::vector<SweepRow> rows;
  rows.reserve(c_outs.size());
  for (std::size_t c : c_outs)
    rows.push_back({c, speedup_ratio({3, c, 3, 3, order, word_width})});
  return rows;
}

/// One weight matrix in the storage model: rows are filter rows (one stored
/// scale each when binarized), rows*cols is the parameter count.
struct LayerStorage {
  std::size_t rows = 0, cols = 0;
  bool binarized = false;
};

struct StorageReport {
  std::uint64_t float_bytes = 0;
  std::uint64_t binary_bytes = 0;
  double ratio = 1.0;
};

/// Float cost is 4 bytes per parameter. A binarized layer stores one bit per
/// parameter (byte-rounded per layer) plus one 4-byte scale per row; a layer
/// left in float costs the same on both sides.
inline StorageReport storage_model(std::span<const LayerStorage> layers) {
  if (layers.empty()) throw DomainError("storage_model: no layers");
  StorageReport rep;
  for (const LayerStorage& layer : layers) {
    if (layer.rows == 0 || layer.cols == 0)
      throw DomainError("storage_model: layer dimensions must be positive");
    const std::uint64_t params =
        static_cast<std::uint64_t>(layer.rows) * static_cast<std::uint64_t>(layer.cols);
    rep.float_bytes += 4 * params;
    if (layer.binarized)
      rep.binary_bytes += (params + 7) / 8 + 4 * static_cast<std::uint64_t>(layer.rows);
    else
      rep.binary_bytes += 4 * params;
  }
  rep.ratio = static_cast<double>(rep.float_bytes) / static_cast<double>(rep.binary_bytes);
  return rep;
}

struct BenchResult {
  std::size_t m = 0, n = 0, k = 0;
  std::size_t order = 1;
  std::size_t reps = 0;
  double float_ms = 0.0;
  double binary_ms = 0.0;
  double quantize_ms = 0.0;
  double measured_ratio = 0.0;
  double predicted_ratio = 0.0;
};

namespace detail {

/// Cache-friendly float GEMM (i-k-j order, float accumulators): the realistic
/// dense baseline the binary path competes against.
inline Matrix float_gemm_ikj(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::span<float> crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const float aik = a.at(i, k);
      std::span<const float> brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

template <typename F>
double time_ms(F&& body) {
  const auto start = std::chrono::steady_clock::now();
  body();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace detail

/// Wall-clock comparison of the float baseline against the packed binary path
/// on one m x k by k x n product. Quantization runs once, outside the timed
/// region, and is reported separately; medians are taken over reps runs.
/// The prediction maps the product onto the model via c_out = m and
/// c_in*w*h = k (output positions drop out of the ratio).
inline BenchResult bench_gemm(std::size_t m, std::size_t n, std::size_t k,
                              std::size_t order, std::size_t reps,
                              std::uint64_t seed = 1) {
  if (m == 0 || n == 0 || k == 0) throw DomainError("bench_gemm: dimensions must be positive");
  if (order < 1) throw DomainError("bench_gemm: order must be >= 1");
  if (reps < 1) throw DomainError("bench_gemm: reps must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Matrix a(m, k), b(k, n);
  for (float& v : a.data()) v = dist(rng);
  for (float& v : b.data()) v = dist(rng);

  BenchResult res;
  res.m = m;
  res.n = n;
  res.k = k;
  res.order = order;
  res.reps = reps;

  QuantizedMatrix qa, qb;
  res.quantize_ms = detail::time_ms([&] {
    qa = quantize_weights(a);
    qb = quantize_input(b, order);
  });

  volatile float sink = 0.0f;  // keeps the products observable
  std::vector<double> float_times, binary_times;
  float_times.reserve(reps);
  binary_times.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    float_times.push_back(detail::time_ms([&] {
      Matrix c = detail::float_gemm_ikj(a, b);
      sink = sink + c.at(0, 0);
    }));
    binary_times.push_back(detail::time_ms([&] {
      Matrix c = binary_gemm(qa, qb);
      sink = sink + c.at(0, 0);
    }));
  }
  res.float_ms = detail::median(std::move(float_times));
  res.binary_ms = detail::median(std::move(binary_times));
  res.measured_ratio = res.float_ms / res.binary_ms;
  const double np = static_cast<double>(m) * static_cast<double>(k);
  const double kk = static_cast<double>(order);
  res.predicted_ratio = 64.0 * np / (kk * np + 64.0 * (kk + 1.0));
  return res;
}

}  // namespace horq
