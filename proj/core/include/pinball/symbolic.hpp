#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pinball {

/// Obstacle labels are 0-based internally and printed 1-based.
using Symbol = std::uint8_t;
using Itinerary = std::vector<Symbol>;

/// True when no two cyclically adjacent symbols coincide and length >= 2.
bool is_admissible(std::span<const Symbol> symbols);

/// Lexicographically least rotation.
Itinerary least_rotation(std::span<const Symbol> symbols);

/// A cyclic itinerary in canonical (least-rotation) form. Classes are taken
/// under rotation only: a word and its reversal index opposite orientations
/// of a ray and are distinct unless the class is reversal invariant.
class Word {
 public:
  Word() = default;

  /// Canonicalises `symbols`; throws Precondition when not admissible.
  explicit Word(std::span<const Symbol> symbols);

  /// Parses a 1-based digit string such as "1213".
  static Word parse(std::string_view digits);

  std::span<const Symbol> symbols() const { return symbols_; }
  std::size_t length() const { return symbols_.size(); }
  Symbol operator[](std::size_t i) const { return symbols_[i]; }

  Word reversed() const;
  std::string str() const;

  auto operator<=>(const Word& other) const {
    if (auto c = symbols_.size() <=> other.symbols_.size(); c != 0) return c;
    return symbols_ <=> other.symbols_;
  }
  bool operator==(const Word&) const = default;

 private:
  Itinerary symbols_;
};

struct PrimitiveDecomposition {
  Word primitive;
  int repetition = 1;
};

PrimitiveDecomposition primitive_decomposition(const Word& w);

/// Every canonical class of admissible cyclic words of length 2..m_max over
/// `r` symbols, ordered by length then lexicographically.
std::vector<Word> enumerate_words(int r, int m_max);

/// Classes of exactly length `m`, same order.
std::vector<Word> enumerate_words_of_length(int r, int m);

/// tr A^m for the r x r matrix with zero diagonal and unit off-diagonal,
/// i.e. (r-1)^m + (r-1)(-1)^m. Throws Overflow when it does not fit.
std::uint64_t count_periodic_points(int r, int m);

}  // namespace pinball
