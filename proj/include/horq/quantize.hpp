#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "horq/binary_plane.hpp"
#include "horq/errors.hpp"
#include "horq/tensor.hpp"

namespace horq {

/// One quantization term: nonnegative scale times a packed ±1 plane.
struct ScaledPlane {
  float beta = 0.0f;
  BinaryPlane plane;

  bool operator==(const ScaledPlane& other) const = default;
};

/// First-order binary quantization of a vector: the plane is sign(x) with
/// sign(0):=+1 and the scale is mean(|x|), the least-squares optimum over all
/// (scale, ±1 plane) pairs. The l1 norm is accumulated in double before the
/// division so the stored 32-bit scale carries one rounding only.
inline ScaledPlane quantize_first_order(std::span<const float> x) {
  if (x.empty()) throw DomainError("quantize_first_order: empty vector");
  double l1 = 0.0;
  for (float v : x) l1 += std::abs(static_cast<double>(v));
  ScaledPlane term;
  term.beta = static_cast<float>(l1 / static_cast<double>(x.size()));
  term.plane = BinaryPlane::sign_of(x);
  return term;
}

/// x - beta * plane, elementwise.
inline std::vector<float> residual(std::span<const float> x, float beta,
                                   const BinaryPlane& plane) {
  if (x.size() != plane.size()) throw ShapeError("residual: length mismatch");
  std::vector<float> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    r[i] = x[i] - (plane.bit(i) ? beta : -beta);
  return r;
}

/// Order-K decomposition of one vector: ordered (scale, plane) terms whose sum
/// approximates the source, each term binarizing the previous residual.
struct HorqCode {
  std::size_t n = 0;
  std::vector<ScaledPlane> terms;

  std::size_t length() const { return n; }
  std::size_t order() const { return terms.size(); }

  bool operator==(const HorqCode& other) const = default;
};

/// Recursive residual quantization to exactly `order` terms. A residual that
/// hits zero keeps emitting (0, all-plus) terms, so every code has uniform
/// order regardless of early exactness.
inline HorqCode quantize_horq(std::span<const float> x, std::size_t order) {
  if (order < 1) throw DomainError("quantize_horq: order must be >= 1");
  if (x.empty()) throw DomainError("quantize_horq: empty vector");
  HorqCode code;
  code.n = x.size();
  code.terms.reserve(order);
  std::vector<float> r(x.begin(), x.end());
  for (std::size_t i = 0; i < order; ++i) {
    ScaledPlane term = quantize_first_order(r);
    for (std::size_t j = 0; j < r.size(); ++j)
      r[j] -= term.plane.bit(j) ? term.beta : -term.beta;
    code.terms.push_back(std::move(term));
  }
  return code;
}

/// Sum of scale * plane over all terms, accumulated in double per element.
inline std::vector<float> reconstruct(const HorqCode& code) {
  std::vector<double> acc(code.n, 0.0);
  for (const ScaledPlane& term : code.terms)
    for (std::size_t i = 0; i < code.n; ++i)
      acc[i] += term.plane.bit(i) ? term.beta : -static_cast<double>(term.beta);
  std::vector<float> out(code.n);
  for (std::size_t i = 0; i < code.n; ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

enum class Orientation { PerRow, PerColumn };

/// A matrix quantized one vector at a time: rows for weights, columns for
/// inputs. All codes share the same order and logical length.
struct QuantizedMatrix {
  Orientation orientation = Orientation::PerRow;
  std::size_t rows = 0, cols = 0;
  std::vector<HorqCode> codes;

  std::size_t order() const { return codes.empty() ? 0 : codes.front().order(); }
  std::size_t vector_length() const { return codes.empty() ? 0 : codes.front().length(); }
};

/// Per-row first-order weight quantization: one (scale, plane) per filter row.
inline QuantizedMatrix quantize_weights(const Matrix& w) {
  if (w.rows() == 0 || w.cols() == 0) throw DomainError("quantize_weights: empty matrix");
  QuantizedMatrix q;
  q.orientation = Orientation::PerRow;
  q.rows = w.rows();
  q.cols = w.cols();
  q.codes.reserve(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    HorqCode code;
    code.n = w.cols();
    code.terms.push_back(quantize_first_order(w.row(r)));
    q.codes.push_back(std::move(code));
  }
  return q;
}

/// Per-column order-K input quantization.
inline QuantizedMatrix quantize_input(const Matrix& x, std::size_t order) {
  if (x.rows() == 0 || x.cols() == 0) throw DomainError("quantize_input: empty matrix");
  if (order < 1) throw DomainError("quantize_input: order must be >= 1");
  QuantizedMatrix q;
  q.orientation = Orientation::PerColumn;
  q.rows = x.rows();
  q.cols = x.cols();
  q.codes.reserve(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const std::vector<float> col = x.column(c);
    q.codes.push_back(quantize_horq(col, order));
  }
  return q;
}

/// Dense matrix whose rows/columns are the reconstructions of the codes.
inline Matrix reconstruct(const QuantizedMatrix& q) {
  Matrix out(q.rows, q.cols);
  if (q.orientation == Orientation::PerRow) {
    for (std::size_t r = 0; r < q.rows; ++r) {
      const std::vector<float> v = reconstruct(q.codes[r]);
      for (std::size_t c = 0; c < q.cols; ++c) out.at(r, c) = v[c];
    }
  } else {
    for (std::size_t c = 0; c < q.cols; ++c) {
      const std::vector<float> v = reconstruct(q.codes[c]);
      for (std::size_t r = 0; r < q.rows; ++r) out.at(r, c) = v[r];
    }
  }
  return out;
}

inline constexpr std::string_view kCodeMagic = "HORQCODE";

/// Little-endian layout: magic, u32 n, u32 K, then K x (f32 beta, ceil(n/64) u64 words).
inline void save_code(const std::filesystem::path& path, const HorqCode& code) {
  if (code.n > 0xffffffffull || code.order() > 0xffffffffull)
    throw IoError("code exceeds file format range");
  std::string bytes;
  bytes.append(kCodeMagic);
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(code.n));
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(code.order()));
  for (const ScaledPlane& term : code.terms) {
    detail::put_f32_le(bytes, term.beta);
    for (std::uint64_t w : term.plane.words()) detail::put_u64_le(bytes, w);
  }
  detail::spill(path, bytes);
}

inline HorqCode load_code(const std::filesystem::path& path) {
  detail::ByteReader r(detail::slurp(path), path.string());
  r.expect_magic(kCodeMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t order = r.u32();
  if (n == 0) throw IoError(path.string() + ": zero-length code");
  if (order == 0) throw IoError(path.string() + ": zero-order code");
  HorqCode code;
  code.n = n;
  code.terms.reserve(order);
  const std::size_t word_count = BinaryPlane::word_count_for(n);
  for (std::uint32_t k = 0; k < order; ++k) {
    ScaledPlane term;
    term.beta = r.f32();
    if (!std::isfinite(term.beta) || term.beta < 0.0f)
      throw IoError(path.string() + ": scale must be finite and nonnegative");
    std::vector<std::uint64_t> words(word_count);
    for (std::size_t w = 0; w < word_count; ++w) words[w] = r.u64();
    try {
      term.plane = BinaryPlane::from_words(n, std::move(words));
    } catch (const Error& e) {
      throw IoError(path.string() + ": " + e.what());
    }
    code.terms.push_back(std::move(term));
  }
  r.expect_end();
  return code;
}

}  // namespace horq
