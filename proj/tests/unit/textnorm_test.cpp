#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pramana/errors.hpp"
#include "pramana/textnorm.hpp"
#include "pramana/utf8.hpp"

using pramana::NormalizationConfig;
using pramana::UnicodeForm;

namespace {

NormalizationConfig plain(UnicodeForm form) {
  NormalizationConfig cfg;
  cfg.unicode_form = form;
  cfg.collapse_whitespace = false;
  cfg.lowercase_latin = false;
  return cfg;
}

std::u32string random_u32(std::mt19937_64& rng, std::size_t max_len) {
  static const std::u32string pool = U"abcdexyz ंकखगतcentralé́";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::u32string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(pool[pick(rng)]);
  return s;
}

}  // namespace

TEST_CASE("unicode normalization matches the frozen reference fixture") {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/normalization_cases.jsonl");
  REQUIRE(in.good());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = nlohmann::json::parse(line);
    const std::string input = row.at("input").get<std::string>();
    const std::string nfc = row.at("nfc").get<std::string>();
    const std::string nfkc = row.at("nfkc").get<std::string>();
    CAPTURE(input);
    CHECK(pramana::normalize(input, plain(UnicodeForm::NFC)) == nfc);
    CHECK(pramana::normalize(input, plain(UnicodeForm::NFKC)) == nfkc);
    ++rows;
  }
  CHECK(rows == 15);
}

TEST_CASE("whitespace is trimmed and collapsed") {
  NormalizationConfig cfg;
  cfg.collapse_whitespace = true;
  cfg.lowercase_latin = false;
  CHECK(pramana::normalize("  अब  तो ", cfg) == "अब तो");
  CHECK(pramana::normalize("\t a \n b ", cfg) == "a b");
  CHECK(pramana::normalize("", cfg) == "");
  CHECK(pramana::normalize("   ", cfg) == "");
}

TEST_CASE("latin lowercasing leaves caseless scripts untouched") {
  NormalizationConfig cfg;
  cfg.lowercase_latin = true;
  CHECK(pramana::normalize("HeLLo", cfg) == "hello");
  // U+00C9 LATIN CAPITAL LETTER E WITH ACUTE lowers to U+00E9.
  CHECK(pramana::normalize("École", cfg) == "école");
  CHECK(pramana::normalize("अब तो", cfg) == "अब तो");
  cfg.lowercase_latin = false;
  CHECK(pramana::normalize("HeLLo", cfg) == "HeLLo");
}

TEST_CASE("configured punctuation is stripped before whitespace handling") {
  NormalizationConfig cfg;
  cfg.strip_punctuation = {U'.', U',', U'?'};
  CHECK(pramana::normalize("ab, cd.", cfg) == "ab cd");
  // A token made entirely of punctuation disappears along with its
  // surrounding whitespace run.
  CHECK(pramana::normalize("ab . cd?", cfg) == "ab cd");
  CHECK(pramana::normalize("a!b", cfg) == "a!b");  // not configured, kept
}

TEST_CASE("normalization is idempotent") {
  std::vector<std::string> inputs = {
      "  अब  तो ", "HeLLo, World!!", "café  x", "ＡＢＣ",
      "", "a", "  mixed  CASE  ,  text?  "};
  for (auto form : {UnicodeForm::NFC, UnicodeForm::NFKC}) {
    for (bool collapse : {false, true}) {
      NormalizationConfig cfg;
      cfg.unicode_form = form;
      cfg.collapse_whitespace = collapse;
      cfg.strip_punctuation = {U',', U'!', U'?'};
      for (const auto& s : inputs) {
        const std::string once = pramana::normalize(s, cfg);
        CHECK(pramana::normalize(once, cfg) == once);
      }
    }
  }
}

TEST_CASE("levenshtein distance handles the canonical pairs") {
  using pramana::levenshtein;
  CHECK(levenshtein(U"kitten", U"sitting") == 3);
  CHECK(levenshtein(U"abc", U"abc") == 0);
  CHECK(levenshtein(U"", U"abc") == 3);
  CHECK(levenshtein(U"abc", U"") == 3);
  CHECK(levenshtein(U"", U"") == 0);
  CHECK(pramana::levenshtein_utf8("kitten", "sitting") == 3);
  CHECK(pramana::levenshtein_utf8("अब", "अव") == 1);
}

TEST_CASE("levenshtein agrees with the full-matrix oracle on random strings") {
  std::mt19937_64 rng(20240811);
  for (int i = 0; i < 300; ++i) {
    const std::u32string a = random_u32(rng, 24);
    const std::u32string b = random_u32(rng, 24);
    const std::size_t d = pramana::levenshtein(a, b);
    CHECK(d == oracle::lev_matrix(a, b));
    CHECK(d == pramana::levenshtein(b, a));                    // symmetry
    CHECK(d <= std::max(a.size(), b.size()));                  // upper bound
    CHECK(d >= (a.size() > b.size() ? a.size() - b.size()      // lower bound
                                    : b.size() - a.size()));
  }
}

TEST_CASE("levenshtein satisfies the triangle inequality") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 120; ++i) {
    const std::u32string a = random_u32(rng, 10);
    const std::u32string b = random_u32(rng, 10);
    const std::u32string c = random_u32(rng, 10);
    CHECK(pramana::levenshtein(a, c) <=
          pramana::levenshtein(a, b) + pramana::levenshtein(b, c));
  }
}

TEST_CASE("levenshtein matches the recursive definition on tiny inputs") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 60; ++i) {
    const std::u32string a = random_u32(rng, 5);
    const std::u32string b = random_u32(rng, 5);
    CHECK(pramana::levenshtein(a, b) == oracle::lev_recursive(a, b));
  }
}

TEST_CASE("matching score pins its defining values") {
  CHECK(pramana::matching_score("abc", "abc").value == doctest::Approx(1.0));
  CHECK(pramana::matching_score("ab", "").value == doctest::Approx(0.0));
  CHECK(pramana::matching_score("abc", "abd").value ==
        doctest::Approx(1.0 - 1.0 / 6.0));
  CHECK(pramana::matching_score("", "").value == doctest::Approx(1.0));
}

TEST_CASE("matching score properties: range, symmetry, equality at 1") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 300; ++i) {
    const std::u32string a = random_u32(rng, 12);
    const std::u32string b = random_u32(rng, 12);
    const std::string a8 = pramana::utf8::encode(a);
    const std::string b8 = pramana::utf8::encode(b);
    const double m = pramana::matching_score(a8, b8).value;
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    CHECK(m == doctest::Approx(pramana::matching_score(b8, a8).value));
    CHECK(m == doctest::Approx(oracle::matching_score(a, b)));
    // Score 1 is exact equality (nonempty case) and vice versa.
    if (a == b) {
      CHECK(m == doctest::Approx(1.0));
    } else {
      CHECK(m < 1.0);
    }
  }
}

TEST_CASE("word error rate pins its defining values") {
  CHECK(pramana::wer("a b c d", "a x c") == doctest::Approx(0.5));
  CHECK(pramana::wer("a", "") == doctest::Approx(1.0));
  CHECK(pramana::wer("a b", "a b") == doctest::Approx(0.0));
  CHECK_THROWS_WITH_AS(pramana::wer("", "a"), "empty reference",
                       pramana::ConfigError);
  CHECK_THROWS_AS(pramana::wer("   ", "a"), pramana::ConfigError);
}

TEST_CASE("character error rate pins its defining values") {
  CHECK(pramana::cer("abcd", "abed") == doctest::Approx(0.25));
  CHECK(pramana::cer("ab", "") == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(pramana::cer("", "x"), "empty reference",
                       pramana::ConfigError);
}

TEST_CASE("word error rate agrees with a word-token oracle") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> vocab = {"a", "bb", "ccc", "x", "yz"};
  std::uniform_int_distribution<std::size_t> nwords(1, 5);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> ref_words, hyp_words;
    const std::size_t nr = nwords(rng);
    const std::size_t nh = nwords(rng) - 1;  // may be 0 words
    for (std::size_t k = 0; k < nr; ++k) ref_words.push_back(vocab[pick(rng)]);
    for (std::size_t k = 0; k < nh; ++k) hyp_words.push_back(vocab[pick(rng)]);
    std::string ref, hyp;
    for (const auto& w : ref_words) ref += (ref.empty() ? "" : " ") + w;
    for (const auto& w : hyp_words) hyp += (hyp.empty() ? "" : " ") + w;
    const double expected =
        static_cast<double>(oracle::lev_words(ref_words, hyp_words)) /
        static_cast<double>(ref_words.size());
    CHECK(pramana::wer(ref, hyp) == doctest::Approx(expected));
    const auto counts = pramana::word_edit_counts(ref, hyp);
    CHECK(counts.edits == oracle::lev_words(ref_words, hyp_words));
    CHECK(counts.ref_len == ref_words.size());
  }
}

TEST_CASE("split_words tokenizes on whitespace runs") {
  CHECK(pramana::split_words("a b c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(pramana::split_words("  a   b ") == std::vector<std::string>{"a", "b"});
  CHECK(pramana::split_words("") == std::vector<std::string>{});
  CHECK(pramana::split_words("   ") == std::vector<std::string>{});
}

TEST_CASE("utf8 round-trips code points") {
  const std::u32string sample = U"अब तो aé\U0001F600";
  CHECK(pramana::utf8::decode(pramana::utf8::encode(sample)) == sample);
  CHECK(pramana::utf8::encode(pramana::utf8::decode("अब तो")) == "अब तो");
}
