#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "bitsel/types.hpp"

namespace bitsel {

// Packed row-major bit matrix. Each row is padded to whole 64-bit words and
// the padding bits are kept at zero, so whole-word XOR/AND/popcount over a
// row never sees garbage.
class BitMatrix {
 public:
  BitMatrix() = default;

  BitMatrix(std::int64_t rows, std::int64_t cols)
      : rows_(rows), cols_(cols), words_per_row_((cols + 63) / 64),
        words_(static_cast<std::size_t>(rows * words_per_row_), 0) {}

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t words_per_row() const { return words_per_row_; }

  bool get(std::int64_t r, std::int64_t c) const {
    return (word(r, c) >> (c & 63)) & 1u;
  }

  void set(std::int64_t r, std::int64_t c, bool v) {
    std::uint64_t& w = word(r, c);
    const std::uint64_t mask = std::uint64_t{1} << (c & 63);
    w = v ? (w | mask) : (w & ~mask);
  }

  std::span<const std::uint64_t> row(std::int64_t r) const {
    return {words_.data() + r * words_per_row_, static_cast<std::size_t>(words_per_row_)};
  }

  std::span<std::uint64_t> row(std::int64_t r) {
    return {words_.data() + r * words_per_row_, static_cast<std::size_t>(words_per_row_)};
  }

  bool operator==(const BitMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && words_ == other.words_;
  }

 private:
  std::uint64_t& word(std::int64_t r, std::int64_t c) {
    return words_[static_cast<std::size_t>(r * words_per_row_ + (c >> 6))];
  }
  const std::uint64_t& word(std::int64_t r, std::int64_t c) const {
    return words_[static_cast<std::size_t>(r * words_per_row_ + (c >> 6))];
  }

  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::int64_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

inline std::int64_t popcount(std::span<const std::uint64_t> words) {
  std::int64_t n = 0;
  for (std::uint64_t w : words) n += std::popcount(w);
  return n;
}

inline std::int64_t and_popcount(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] & b[i]);
  return n;
}

}  // namespace bitsel
