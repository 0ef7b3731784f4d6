#include "pramana/textnorm.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <numeric>

#include "pramana/errors.hpp"
#include "pramana/utf8.hpp"

namespace pramana {

namespace {

bool is_ascii(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80) return false;
  }
  return true;
}

bool ascii_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
         cp == U'\v';
}

bool space_cp(char32_t cp) {
  if (cp < 0x80) return ascii_space(cp);
  return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

bool latin_cp(char32_t cp) {
  return cp <= 0x24F || (cp >= 0x1E00 && cp <= 0x1EFF);
}

char32_t lower_latin_cp(char32_t cp) {
  if (!latin_cp(cp)) return cp;
  if (cp < 0x80) {
    return (cp >= U'A' && cp <= U'Z') ? cp + 0x20 : cp;
  }
  return static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp)));
}

std::string unicode_normalize(std::string_view s, UnicodeForm form) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* n = (form == UnicodeForm::NFC)
                                  ? icu::Normalizer2::getNFCInstance(ec)
                                  : icu::Normalizer2::getNFKCInstance(ec);
  if (U_FAILURE(ec) || n == nullptr) {
    throw DependencyError("unicode normalizer unavailable");
  }
  icu::UnicodeString in =
      icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString normed = n->normalize(in, ec);
  if (U_FAILURE(ec)) {
    throw DependencyError("unicode normalizer unavailable");
  }
  std::string out;
  normed.toUTF8String(out);
  return out;
}

// One full canonicalization pass. normalize() iterates this to a fixpoint:
// removing punctuation or whitespace can make combining marks adjacent to
// new bases, so a single composition pass is not always enough.
std::string pass(std::string_view text, const NormalizationConfig& cfg) {
  std::u32string cps;
  if (is_ascii(text)) {
    // ASCII is invariant under NFC/NFKC; skip the ICU round-trip.
    cps.assign(text.begin(), text.end());
  } else {
    cps = utf8::decode(unicode_normalize(text, cfg.unicode_form));
  }

  std::u32string kept;
  kept.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cfg.lowercase_latin) cp = lower_latin_cp(cp);
    if (!cfg.strip_punctuation.empty() && cfg.strip_punctuation.count(cp)) continue;
    kept.push_back(cp);
  }

  std::size_t first = 0;
  std::size_t last = kept.size();
  while (first < last && space_cp(kept[first])) ++first;
  while (last > first && space_cp(kept[last - 1])) --last;

  std::u32string out;
  out.reserve(last - first);
  bool pending_space = false;
  for (std::size_t i = first; i < last; ++i) {
    char32_t cp = kept[i];
    if (space_cp(cp)) {
      if (cfg.collapse_whitespace) {
        pending_space = true;
      } else {
        out.push_back(cp);
      }
    } else {
      if (pending_space) {
        out.push_back(U' ');
        pending_space = false;
      }
      out.push_back(cp);
    }
  }
  return utf8::encode(out);
}

template <typename Seq>
std::size_t seq_levenshtein(const Seq& a_full, const Seq& b_full) {
  std::size_t a_begin = 0, a_end = a_full.size();
  std::size_t b_begin = 0, b_end = b_full.size();
  while (a_begin < a_end && b_begin < b_end && a_full[a_begin] == b_full[b_begin]) {
    ++a_begin;
    ++b_begin;
  }
  while (a_end > a_begin && b_end > b_begin && a_full[a_end - 1] == b_full[b_end - 1]) {
    --a_end;
    --b_end;
  }
  const std::size_t an = a_end - a_begin;
  const std::size_t bn = b_end - b_begin;
  if (an == 0) return bn;
  if (bn == 0) return an;

  // Two-row DP; iterate over the longer sequence, keep a row for the shorter.
  const bool swap = an < bn;
  const std::size_t rows = swap ? bn : an;
  const std::size_t cols = swap ? an : bn;
  auto at_row = [&](std::size_t i) { return swap ? b_full[b_begin + i] : a_full[a_begin + i]; };
  auto at_col = [&](std::size_t j) { return swap ? a_full[a_begin + j] : b_full[b_begin + j]; };

  std::vector<std::size_t> row(cols + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= rows; ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= cols; ++j) {
      const std::size_t del = row[j] + 1;
      const std::size_t ins = row[j - 1] + 1;
      const std::size_t sub = diag + (at_row(i - 1) == at_col(j - 1) ? 0 : 1);
      diag = row[j];
      row[j] = std::min({del, ins, sub});
    }
  }
  return row[cols];
}

}  // namespace

std::string normalize(std::string_view text, const NormalizationConfig& cfg) {
  std::string cur = pass(text, cfg);
  for (int i = 0; i < 7; ++i) {
    std::string next = pass(cur, cfg);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

std::size_t levenshtein(std::u32string_view p, std::u32string_view q) {
  return seq_levenshtein(p, q);
}

std::size_t levenshtein_utf8(std::string_view p, std::string_view q) {
  return levenshtein(utf8::decode(p), utf8::decode(q));
}

MatchScore matching_score(std::string_view p, std::string_view q) {
  const std::u32string a = utf8::decode(p);
  const std::u32string b = utf8::decode(q);
  const std::size_t total = a.size() + b.size();
  if (total == 0) return MatchScore{1.0};
  const std::size_t d = levenshtein(a, b);
  return MatchScore{1.0 - static_cast<double>(d) / static_cast<double>(total)};
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < n && !ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

EditCounts word_edit_counts(std::string_view reference, std::string_view hypothesis) {
  const std::vector<std::string> ref = split_words(reference);
  const std::vector<std::string> hyp = split_words(hypothesis);
  return EditCounts{seq_levenshtein(ref, hyp), ref.size()};
}

EditCounts char_edit_counts(std::string_view reference, std::string_view hypothesis) {
  const std::u32string ref = utf8::decode(reference);
  const std::u32string hyp = utf8::decode(hypothesis);
  return EditCounts{seq_levenshtein(ref, hyp), ref.size()};
}

double wer(std::string_view reference, std::string_view hypothesis) {
  const EditCounts c = word_edit_counts(reference, hypothesis);
  if (c.ref_len == 0) throw ConfigError("empty reference");
  return static_cast<double>(c.edits) / static_cast<double>(c.ref_len);
}

double cer(std::string_view reference, std::string_view hypothesis) {
  const EditCounts c = char_edit_counts(reference, hypothesis);
  if (c.ref_len == 0) throw ConfigError("empty reference");
  return static_cast<double>(c.edits) / static_cast<double>(c.ref_len);
}

}  // namespace pramana
