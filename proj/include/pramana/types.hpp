#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pramana {

struct AudioSegment {
  std::string id;
  std::string source_id;
  std::string audio_path;
  double offset_s = 0.0;
  double duration_s = 0.0;
  std::optional<std::string> domain;
  // Ground truth, present only in eval / synthetic corpora.
  std::optional<std::string> reference_text;
};

struct TranscriptCandidate {
  std::string segment_id;
  std::string transcriber_id;
  // Raw transcriber output; normalization happens at comparison time.
  std::string text;
  std::optional<std::vector<std::vector<double>>> token_dists;
  std::optional<double> confidence;
};

struct CandidateSet {
  std::string segment_id;
  std::vector<TranscriptCandidate> candidates;
};

// Per-segment result of one transcriber call. Failures are carried as data
// so that one bad segment never sinks the rest of its batch.
struct TranscribeOutcome {
  std::string segment_id;
  std::optional<TranscriptCandidate> candidate;
  std::string error;  // empty on success

  bool ok() const { return error.empty() && candidate.has_value(); }
};

enum class StageRejected {
  transcription_error,
  no_agreement,
  filtered,
  missing_evaluator_input,
};

std::string_view to_string(StageRejected r);
std::optional<StageRejected> stage_rejected_from_string(std::string_view s);

}  // namespace pramana
