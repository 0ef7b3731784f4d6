#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace pramana {

enum class UnicodeForm { NFC, NFKC };

struct NormalizationConfig {
  UnicodeForm unicode_form = UnicodeForm::NFC;
  bool collapse_whitespace = true;
  // Code points removed from the text before whitespace handling.
  std::unordered_set<char32_t> strip_punctuation;
  // Lowercasing is restricted to Latin-script code points so that
  // caseless scripts pass through untouched.
  bool lowercase_latin = true;
};

// Canonicalize text: Unicode-normalize, lowercase Latin letters, strip the
// configured punctuation, trim, and (optionally) collapse internal
// whitespace runs to a single space. Idempotent: applying it twice gives
// the same string as applying it once.
std::string normalize(std::string_view text, const NormalizationConfig& cfg);

// Character-level edit distance over Unicode scalar values.
std::size_t levenshtein(std::u32string_view p, std::u32string_view q);
std::size_t levenshtein_utf8(std::string_view p, std::string_view q);

struct MatchScore {
  double value = 0.0;
};

// 1 - LD(p,q) / (|p| + |q|), lengths in Unicode scalar values.
// Both strings empty yields 1.0 (vacuous agreement). Callers are expected
// to pass already-normalized text; no normalization happens here.
MatchScore matching_score(std::string_view p, std::string_view q);

struct EditCounts {
  std::size_t edits = 0;
  std::size_t ref_len = 0;
};

// Whitespace-delimited tokens (ASCII whitespace; normalized text only
// ever contains U+0020 separators).
std::vector<std::string> split_words(std::string_view text);

// Word-level / character-level edit counts against a reference. These are
// the micro-average building blocks: sum edits and ref_len across many
// utterances before dividing.
EditCounts word_edit_counts(std::string_view reference, std::string_view hypothesis);
EditCounts char_edit_counts(std::string_view reference, std::string_view hypothesis);

// Word error rate: word-level edit distance / reference word count.
// Throws ConfigError("empty reference") when the reference has no words.
double wer(std::string_view reference, std::string_view hypothesis);

// Character error rate: code-point edit distance / reference length.
// Throws ConfigError("empty reference") when the reference is empty.
double cer(std::string_view reference, std::string_view hypothesis);

}  // namespace pramana
