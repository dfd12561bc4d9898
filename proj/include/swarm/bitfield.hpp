#pragma once

#include <cstdint>
#include <vector>

#include "swarm/core.hpp"

namespace swarm {

// Piece-possession bitmap with a cached popcount.
class Bitfield {
 public:
  Bitfield() = default;
  explicit Bitfield(PieceIndex n, bool ones = false)
      : size_(n), words_((n + 63) / 64, ones ? ~std::uint64_t{0} : 0) {
    if (ones && n % 64 != 0) words_.back() &= (std::uint64_t{1} << (n % 64)) - 1;
    count_ = ones ? n : 0;
  }

  PieceIndex size() const { return size_; }
  PieceIndex count() const { return count_; }
  bool all() const { return count_ == size_; }
  bool none() const { return count_ == 0; }

  bool test(PieceIndex i) const {
    return (words_[i >> 6] >> (i & 63)) & 1;
  }

  // Returns true when the bit actually flipped.
  bool set(PieceIndex i) {
    std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (words_[i >> 6] & mask) return false;
    words_[i >> 6] |= mask;
    ++count_;
    return true;
  }

  template <typename Fn>
  void for_each_set(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        int b = __builtin_ctzll(bits);
        fn(static_cast<PieceIndex>(w * 64 + b));
        bits &= bits - 1;
      }
    }
  }

  bool operator==(const Bitfield& other) const {
    return size_ == other.size_ && words_ == other.words_;
  }

 private:
  PieceIndex size_ = 0;
  PieceIndex count_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace swarm
