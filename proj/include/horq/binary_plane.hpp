#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "horq/errors.hpp"

namespace horq {

/// Bit-packed ±1 vector: bit 1 means +1, bit 0 means -1, 64 bits per word.
/// Bits at positions >= size() are always zero (canonical tail), so word-level
/// operations never see garbage past the logical end.
class BinaryPlane {
public:
  static constexpr std::size_t kWordBits = 64;

  BinaryPlane() = default;

  /// Pack a vector whose elements are exactly +1.0f or -1.0f.
  static BinaryPlane pack(std::span<const float> v) {
    if (v.empty()) throw DomainError("pack: empty vector");
    BinaryPlane p(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 1.0f) {
        p.words_[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
      } else if (v[i] != -1.0f) {
        throw DomainError("pack: element " + std::to_string(i) + " is not ±1");
      }
    }
    return p;
  }

  /// Elementwise sign with sign(0) := +1. Accepts any finite reals.
  static BinaryPlane sign_of(std::span<const float> v) {
    if (v.empty()) throw DomainError("sign_of: empty vector");
    BinaryPlane p(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] >= 0.0f) p.words_[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
    return p;
  }

  /// Rebuild from raw words (file loading); enforces the canonical tail.
  static BinaryPlane from_words(std::size_t n, std::vector<std::uint64_t> words) {
    if (n == 0) throw ShapeError("from_words: zero length");
    if (words.size() != word_count_for(n))
      throw ShapeError("from_words: word count does not match length");
    BinaryPlane p;
    p.n_ = n;
    p.words_ = std::move(words);
    if (!p.words_.empty() && n % kWordBits != 0) {
      const std::uint64_t mask = tail_mask(n);
      if ((p.words_.back() & ~mask) != 0)
        throw DomainError("from_words: nonzero bits past the logical end");
    }
    return p;
  }

  static BinaryPlane all_plus(std::size_t n) {
    if (n == 0) throw DomainError("all_plus: zero length");
    BinaryPlane p(n);
    for (auto& w : p.words_) w = ~std::uint64_t{0};
    p.words_.back() = tail_mask(n);
    return p;
  }

  std::size_t size() const { return n_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool bit(std::size_t i) const {
    return (words_[i / kWordBits] >> (i % kWordBits)) & 1u;
  }
  float element(std::size_t i) const { return bit(i) ? 1.0f : -1.0f; }

  std::vector<float> unpack() const {
    std::vector<float> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = element(i);
    return out;
  }

  bool operator==(const BinaryPlane& other) const = default;

  static std::size_t word_count_for(std::size_t n) {
    return (n + kWordBits - 1) / kWordBits;
  }

  /// Ones at the live positions of the final word (all ones when n % 64 == 0).
  static std::uint64_t tail_mask(std::size_t n) {
    const std::size_t rem = n % kWordBits;
    return rem == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << rem) - 1;
  }

private:
  explicit BinaryPlane(std::size_t n) : n_(n), words_(word_count_for(n), 0) {}

  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Inner product of two ±1 vectors over packed words:
/// 2*popcount(XNOR) - n, with the final word masked to the logical length.
/// Exact integer result in [-n, n] with parity(result) == parity(n).
inline std::int64_t xnor_dot(const BinaryPlane& a, const BinaryPlane& b) {
  if (a.size() != b.size()) throw ShapeError("xnor_dot: length mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 0;
  const auto wa = a.words();
  const auto wb = b.words();
  std::int64_t ones = 0;
  const std::size_t last = wa.size() - 1;
  for (std::size_t w = 0; w < last; ++w)
    ones += std::popcount(~(wa[w] ^ wb[w]));
  ones += std::popcount(~(wa[last] ^ wb[last]) & BinaryPlane::tail_mask(n));
  return 2 * ones - static_cast<std::int64_t>(n);
}

}  // namespace horq
