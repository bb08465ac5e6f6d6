#include "pinball/symbolic.hpp"

#include <algorithm>
#include <limits>

#include "pinball/error.hpp"

namespace pinball {

bool is_admissible(std::span<const Symbol> symbols) {
  const std::size_t m = symbols.size();
  if (m < 2) return false;
  for (std::size_t i = 0; i < m; ++i) {
    if (symbols[i] == symbols[(i + 1) % m]) return false;
  }
  return true;
}

Itinerary least_rotation(std::span<const Symbol> symbols) {
  const std::size_t m = symbols.size();
  std::size_t best = 0;
  for (std::size_t start = 1; start < m; ++start) {
    for (std::size_t n = 0; n < m; ++n) {
      const Symbol a = symbols[(start + n) % m];
      const Symbol b = symbols[(best + n) % m];
      if (a != b) {
        if (a < b) best = start;
        break;
      }
    }
  }
  Itinerary out(m);
  for (std::size_t n = 0; n < m; ++n) out[n] = symbols[(best + n) % m];
  return out;
}

Word::Word(std::span<const Symbol> symbols) {
  if (!is_admissible(symbols)) fail(ErrorKind::Precondition, "inadmissible itinerary");
  symbols_ = least_rotation(symbols);
}

Word Word::parse(std::string_view digits) {
  Itinerary symbols;
  for (char c : digits) {
    if (c < '1' || c > '9') fail(ErrorKind::Parse, "bad symbol '" + std::string(1, c) + "' in word");
    symbols.push_back(static_cast<Symbol>(c - '1'));
  }
  if (!is_admissible(symbols)) {
    fail(ErrorKind::Parse, "inadmissible word '" + std::string(digits) + "'");
  }
  return Word(symbols);
}

Word Word::reversed() const {
  Itinerary rev(symbols_.rbegin(), symbols_.rend());
  return Word(rev);
}

std::string Word::str() const {
  std::string out;
  out.reserve(symbols_.size());
  for (Symbol s : symbols_) out.push_back(static_cast<char>('1' + s));
  return out;
}

PrimitiveDecomposition primitive_decomposition(const Word& w) {
  const auto s = w.symbols();
  const std::size_t m = s.size();
  for (std::size_t p = 1; p <= m; ++p) {
    if (m % p != 0) continue;
    bool periodic = true;
    for (std::size_t n = p; n < m && periodic; ++n) periodic = s[n] == s[n - p];
    if (periodic) {
      // A least rotation's prefix of length p is itself least among rotations.
      return {Word(s.subspan(0, p)), static_cast<int>(m / p)};
    }
  }
  return {w, 1};
}

namespace {

// Recursive FKM necklace generation with pruning of prefixes that already
// contain an immediate repetition.
struct NecklaceGenerator {
  int r;
  int m;
  Itinerary a;
  std::vector<Word>* out;

  void run(int t, int p) {
    if (t > m) {
      if (m % p == 0 && a[m] != a[1]) {
        out->emplace_back(std::span<const Symbol>(a).subspan(1, static_cast<std::size_t>(m)));
      }
      return;
    }
    for (int j = a[t - p]; j < r; ++j) {
      if (t > 1 && j == a[t - 1]) continue;
      a[t] = static_cast<Symbol>(j);
      run(t + 1, j == a[t - p] ? p : t);
    }
  }
};

}  // namespace

std::vector<Word> enumerate_words_of_length(int r, int m) {
  require(r >= 2 && r <= 9, "alphabet size must be in [2, 9]");
  require(m >= 2, "word length must be >= 2");
  std::vector<Word> out;
  NecklaceGenerator gen{r, m, Itinerary(static_cast<std::size_t>(m) + 1, 0), &out};
  // a[0] = 0 seeds the first comparison; it is never part of the word.
  gen.run(1, 1);
  return out;
}

std::vector<Word> enumerate_words(int r, int m_max) {
  require(r >= 3, "need r >= 3");
  require(m_max >= 2, "need m_max >= 2");
  std::vector<Word> out;
  for (int m = 2; m <= m_max; ++m) {
    auto level = enumerate_words_of_length(r, m);
    out.insert(out.end(), std::make_move_iterator(level.begin()), std::make_move_iterator(level.end()));
  }
  return out;
}

std::uint64_t count_periodic_points(int r, int m) {
  require(r >= 2, "need r >= 2");
  require(m >= 1, "need m >= 1");
  const std::uint64_t base = static_cast<std::uint64_t>(r - 1);
  std::uint64_t power = 1;
  for (int n = 0; n < m; ++n) {
    if (__builtin_mul_overflow(power, base, &power)) {
      fail(ErrorKind::Overflow, "count_periodic_points overflows 64 bits");
    }
  }
  if (m % 2 == 0) {
    std::uint64_t total = 0;
    if (__builtin_add_overflow(power, base, &total)) {
      fail(ErrorKind::Overflow, "count_periodic_points overflows 64 bits");
    }
    return total;
  }
  return power - base;
}

}  // namespace pinball
