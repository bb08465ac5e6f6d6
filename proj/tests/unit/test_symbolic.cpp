#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "pinball/error.hpp"
#include "pinball/symbolic.hpp"

using namespace pinball;

namespace {

std::vector<int> as_ints(const Word& w) {
  std::vector<int> out;
  for (auto s : w.symbols()) out.push_back(s);
  return out;
}

}  // namespace

TEST_CASE("canonical form and parsing") {
  const Word w = Word::parse("2131");
  CHECK(w.str() == "1213");
  CHECK(Word::parse("123").reversed().str() == "132");
  CHECK(Word::parse("12") == Word::parse("21"));
  CHECK_THROWS_AS(Word::parse("1123"), Error);
  CHECK_THROWS_AS(Word::parse("1"), Error);
  CHECK_THROWS_AS(Word::parse("1x"), Error);
}

TEST_CASE("primitive decomposition") {
  auto d = primitive_decomposition(Word::parse("1212"));
  CHECK(d.primitive.str() == "12");
  CHECK(d.repetition == 2);
  d = primitive_decomposition(Word::parse("123123123"));
  CHECK(d.primitive.str() == "123");
  CHECK(d.repetition == 3);
  d = primitive_decomposition(Word::parse("1213"));
  CHECK(d.primitive.str() == "1213");
  CHECK(d.repetition == 1);
}

TEST_CASE("small class lists") {
  const auto two = enumerate_words_of_length(3, 2);
  REQUIRE(two.size() == 3);
  CHECK(two[0].str() == "12");
  CHECK(two[1].str() == "13");
  CHECK(two[2].str() == "23");
  const auto three = enumerate_words_of_length(3, 3);
  REQUIRE(three.size() == 2);
  CHECK(three[0].str() == "123");
  CHECK(three[1].str() == "132");
}

TEST_CASE("enumeration matches brute force") {
  for (int r = 2; r <= 5; ++r) {
    for (int m = 2; m <= (r <= 3 ? 10 : 7); ++m) {
      const auto words = enumerate_words_of_length(r, m);
      std::set<std::vector<int>> got;
      for (const auto& w : words) got.insert(as_ints(w));
      CHECK(got.size() == words.size());
      CHECK(got == oracle::brute_force_classes(r, m));
    }
  }
}

TEST_CASE("class totals reconcile with the transfer matrix trace") {
  for (int r = 3; r <= 5; ++r) {
    for (int m = 2; m <= 12; ++m) {
      std::uint64_t points = 0;
      for (const auto& w : enumerate_words_of_length(r, m)) {
        points += static_cast<std::uint64_t>(oracle::primitive_period(as_ints(w)));
      }
      const auto trace = oracle::transfer_trace(r, m);
      CHECK(points == trace);
      CHECK(count_periodic_points(r, m) == trace);
    }
  }
}

TEST_CASE("enumerate_words orders by length then lexicographically") {
  const auto words = enumerate_words(4, 6);
  for (std::size_t n = 1; n < words.size(); ++n) CHECK(words[n - 1] < words[n]);
  CHECK(words.front().length() == 2);
  CHECK(words.back().length() == 6);
}

TEST_CASE("counting overflow is reported") {
  CHECK_THROWS_AS(count_periodic_points(9, 40), Error);
  try {
    count_periodic_points(9, 40);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Overflow);
  }
}
