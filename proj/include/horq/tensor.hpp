#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "horq/errors.hpp"

namespace horq {

using Shape = std::vector<std::size_t>;

/// Dense real-valued tensor, rank 1..4, row-major, 32-bit scalars.
/// Immutable after construction; every constructor rejects NaN/Inf.
class Tensor {
public:
  Tensor(Shape shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate();
  }

  std::size_t rank() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<const float> data() const { return data_; }

  float at(std::size_t i) const { return data_[i]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool operator==(const Tensor& other) const = default;

private:
  void validate() const {
    if (shape_.empty() || shape_.size() > 4)
      throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape_.size()));
    std::size_t count = 1;
    for (std::size_t extent : shape_) {
      if (extent == 0) throw ShapeError("tensor extents must be positive");
      if (count > std::numeric_limits<std::size_t>::max() / extent)
        throw ShapeError("tensor extent product overflows");
      count *= extent;
    }
    if (count != data_.size())
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape product " + std::to_string(count));
    for (float v : data_)
      if (!std::isfinite(v)) throw DomainError("tensor admits finite scalars only");
  }

  Shape shape_;
  std::vector<float> data_;
};

/// Row-major dense matrix of 32-bit reals. Mutable working type; no bounds checks.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ShapeError("matrix data size does not match rows*cols");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data_).subspan(r * cols_, cols_);
  }
  std::span<float> row(std::size_t r) {
    return std::span<float>(data_).subspan(r * cols_, cols_);
  }
  std::vector<float> column(std::size_t c) const {
    std::vector<float> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
    return out;
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool operator==(const Matrix& other) const = default;

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<float> data_;
};

/// Reference product A*B with double accumulation. Oracle-grade, not tuned.
inline Matrix gemm(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("gemm: inner dimensions disagree");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k)
        acc += static_cast<double>(a.at(i, k)) * static_cast<double>(b.at(k, j));
      c.at(i, j) = static_cast<float>(acc);
    }
  }
  return c;
}

/// A * B^T for A (m x k), B (n x k); same accumulation discipline as gemm.
inline Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("gemm_nt: inner dimensions disagree");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k)
        acc += static_cast<double>(a.at(i, k)) * static_cast<double>(b.at(j, k));
      c.at(i, j) = static_cast<float>(acc);
    }
  }
  return c;
}

/// A^T * B for A (k x m), B (k x n); same accumulation discipline as gemm.
inline Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("gemm_tn: inner dimensions disagree");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k)
        acc += static_cast<double>(a.at(k, i)) * static_cast<double>(b.at(k, j));
      c.at(i, j) = static_cast<float>(acc);
    }
  }
  return c;
}

/// Convolution geometry. Construction checks the output-size formula
/// out = (in + 2*pad - filter)/stride + 1 divides exactly; anything else throws.
struct ConvGeometry {
  std::size_t c_in, c_out;
  std::size_t filter_w, filter_h;
  std::size_t stride, pad;
  std::size_t in_w, in_h;
  std::size_t out_w, out_h;

  ConvGeometry(std::size_t c_in_, std::size_t c_out_, std::size_t filter_w_,
               std::size_t filter_h_, std::size_t stride_, std::size_t pad_,
               std::size_t in_w_, std::size_t in_h_)
      : c_in(c_in_), c_out(c_out_), filter_w(filter_w_), filter_h(filter_h_),
        stride(stride_), pad(pad_), in_w(in_w_), in_h(in_h_) {
    if (c_in == 0 || c_out == 0 || filter_w == 0 || filter_h == 0 || in_w == 0 ||
        in_h == 0 || stride == 0)
      throw ShapeError("conv geometry requires positive counts");
    out_w = span_steps(in_w, filter_w, "width");
    out_h = span_steps(in_h, filter_h, "height");
  }

  /// Elements in one receptive-field patch (= one weight row).
  std::size_t patch_len() const { return c_in * filter_w * filter_h; }
  /// Number of output spatial positions (= im2col column count).
  std::size_t out_positions() const { return out_w * out_h; }

  /// Geometry for input (c_in, in_w, in_h) and weights (c_out, c_in, w, h).
  static ConvGeometry infer(const Tensor& input, const Tensor& weights,
                            std::size_t stride, std::size_t pad) {
    if (input.rank() != 3) throw ShapeError("conv input must have rank 3");
    if (weights.rank() != 4) throw ShapeError("conv weights must have rank 4");
    if (input.shape()[0] != weights.shape()[1])
      throw ShapeError("input channel count does not match weights");
    return ConvGeometry(input.shape()[0], weights.shape()[0], weights.shape()[2],
                        weights.shape()[3], stride, pad, input.shape()[1],
                        input.shape()[2]);
  }

private:
  std::size_t span_steps(std::size_t in, std::size_t filter, const char* axis) const {
    std::size_t padded = in + 2 * pad;
    if (padded < filter)
      throw ShapeError(std::string("filter exceeds padded input along ") + axis);
    std::size_t reach = padded - filter;
    if (reach % stride != 0)
      throw ShapeError(std::string("stride does not divide padded span along ") + axis);
    return reach / stride + 1;
  }
};

/// Flatten each filter of a (c_out, c_in, w, h) weight tensor into one row,
/// (channel, row, col) order. Values are copied bit-identically.
inline Matrix reshape_weight(const Tensor& w) {
  if (w.rank() != 4) throw ShapeError("reshape_weight expects a rank-4 tensor");
  const std::size_t c_out = w.shape()[0];
  const std::size_t row_len = w.size() / c_out;
  // Filters are already contiguous row-major blocks.
  std::vector<float> data(w.data().begin(), w.data().end());
  return Matrix(c_out, row_len, std::move(data));
}

/// Lay out receptive-field patches as columns: column j holds the patch for
/// output position (j / out_h, j % out_h), flattened (channel, row, col).
/// Padding positions contribute exactly 0.0f.
inline Matrix im2col(const Tensor& x, const ConvGeometry& g) {
  if (x.rank() != 3) throw ShapeError("im2col expects a rank-3 tensor");
  if (x.shape()[0] != g.c_in || x.shape()[1] != g.in_w || x.shape()[2] != g.in_h)
    throw ShapeError("im2col: input shape does not match geometry");
  Matrix out(g.patch_len(), g.out_positions());
  for (std::size_t o1 = 0; o1 < g.out_w; ++o1) {
    for (std::size_t o2 = 0; o2 < g.out_h; ++o2) {
      const std::size_t j = o1 * g.out_h + o2;
      std::size_t r = 0;
      for (std::size_t c = 0; c < g.c_in; ++c) {
        for (std::size_t k1 = 0; k1 < g.filter_w; ++k1) {
          for (std::size_t k2 = 0; k2 < g.filter_h; ++k2, ++r) {
            const std::ptrdiff_t i1 =
                static_cast<std::ptrdiff_t>(o1 * g.stride + k1) -
                static_cast<std::ptrdiff_t>(g.pad);
            const std::ptrdiff_t i2 =
                static_cast<std::ptrdiff_t>(o2 * g.stride + k2) -
                static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = i1 >= 0 && i2 >= 0 &&
                                i1 < static_cast<std::ptrdiff_t>(g.in_w) &&
                                i2 < static_cast<std::ptrdiff_t>(g.in_h);
            out.at(r, j) = inside ? x.at(c, static_cast<std::size_t>(i1),
                                         static_cast<std::size_t>(i2))
                                  : 0.0f;
          }
        }
      }
    }
  }
  return out;
}

/// Inverse of the output flattening: (c_out) x (out_w*out_h) back to rank 3.
inline Tensor reshape_output(const Matrix& yr, const ConvGeometry& g) {
  if (yr.rows() != g.c_out || yr.cols() != g.out_positions())
    throw ShapeError("reshape_output: matrix shape does not match geometry");
  std::vector<float> data(yr.data().begin(), yr.data().end());
  return Tensor({g.c_out, g.out_w, g.out_h}, std::move(data));
}

/// Flatten a rank-3 output tensor back to matrix form; round-trips bit-exactly
/// with reshape_output.
inline Matrix flatten_output(const Tensor& y) {
  if (y.rank() != 3) throw ShapeError("flatten_output expects a rank-3 tensor");
  std::vector<float> data(y.data().begin(), y.data().end());
  return Matrix(y.shape()[0], y.shape()[1] * y.shape()[2], std::move(data));
}

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32_le(std::string& out, float v) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

/// Byte cursor over a fully loaded file; every read is bounds-checked.
class ByteReader {
public:
  ByteReader(std::string bytes, std::string context)
      : bytes_(std::move(bytes)), context_(std::move(context)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::string_view(bytes_).substr(pos_, magic.size()) != magic)
      throw IoError(context_ + ": bad magic");
    pos_ += magic.size();
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) throw IoError(context_ + ": trailing bytes after payload");
  }

private:
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw IoError(context_ + ": truncated payload");
  }

  std::string bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void spill(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline constexpr std::string_view kTensorMagic = "HORQTNSR";

/// Little-endian layout: magic, u32 rank, rank x u32 dims, dims-product x f32.
inline void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::string bytes;
  bytes.append(kTensorMagic);
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t extent : t.shape()) {
    if (extent > 0xffffffffull) throw IoError("tensor extent exceeds file format range");
    detail::put_u32_le(bytes, static_cast<std::uint32_t>(extent));
  }
  for (float v : t.data()) detail::put_f32_le(bytes, v);
  detail::spill(path, bytes);
}

inline Tensor load_tensor(const std::filesystem::path& path) {
  detail::ByteReader r(detail::slurp(path), path.string());
  r.expect_magic(kTensorMagic);
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 4) throw IoError(path.string() + ": rank must be 1..4");
  Shape shape(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t extent = r.u32();
    if (extent == 0) throw IoError(path.string() + ": zero-length dimension");
    if (count > std::numeric_limits<std::size_t>::max() / extent)
      throw IoError(path.string() + ": dimension product overflows");
    shape[i] = extent;
    count *= extent;
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = r.f32();
    if (!std::isfinite(data[i])) throw IoError(path.string() + ": non-finite scalar in payload");
  }
  r.expect_end();
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace horq
