#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>

namespace cdpo {

inline constexpr int kMaxOptions = 5;

enum class Letter : std::uint8_t { A = 0, B, C, D, E };

inline char to_char(Letter l) { return static_cast<char>('A' + static_cast<int>(l)); }

inline std::optional<Letter> letter_from_char(char c) {
  if (c < 'A' || c >= 'A' + kMaxOptions) return std::nullopt;
  return static_cast<Letter>(c - 'A');
}

inline Letter letter_at(int index) { return static_cast<Letter>(index); }

inline int index_of(Letter l) { return static_cast<int>(l); }

// Subset of {A..E} as a bitmask.
class LetterSet {
 public:
  constexpr LetterSet() = default;
  constexpr explicit LetterSet(std::uint8_t bits) : bits_(bits & 0x1F) {}

  void insert(Letter l) { bits_ |= bit(l); }
  void erase(Letter l) { bits_ &= static_cast<std::uint8_t>(~bit(l)); }
  bool contains(Letter l) const { return (bits_ & bit(l)) != 0; }
  bool empty() const { return bits_ == 0; }
  int size() const { return std::popcount(bits_); }
  std::uint8_t bits() const { return bits_; }

  bool is_subset_of(LetterSet other) const { return (bits_ & ~other.bits_) == 0; }

  std::string to_string() const {
    std::string s;
    for (int i = 0; i < kMaxOptions; ++i)
      if (contains(letter_at(i))) s.push_back(to_char(letter_at(i)));
    return s;
  }

  friend bool operator==(LetterSet, LetterSet) = default;

 private:
  static constexpr std::uint8_t bit(Letter l) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l));
  }
  std::uint8_t bits_ = 0;
};

}  // namespace cdpo
