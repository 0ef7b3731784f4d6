#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pramana/types.hpp"

namespace pramana {

// Durable per-segment outcome: the candidates, the agreement summary, the
// evaluator scores, and either the accepted text or the stage that
// rejected the segment.
struct LabelRecord {
  AudioSegment segment;
  std::vector<TranscriptCandidate> candidates;
  std::vector<int> agreement_scores;
  std::optional<std::size_t> selected;
  std::map<std::string, double> evaluator_scores;
  std::optional<std::string> accepted_text;
  std::optional<StageRejected> stage_rejected;
};

nlohmann::json segment_to_json(const AudioSegment& seg);
AudioSegment segment_from_json(const nlohmann::json& row);

nlohmann::json label_record_to_json(const LabelRecord& rec);
LabelRecord label_record_from_json(const nlohmann::json& row);

// JSONL readers; parse failures carry "<path>:<line>" context.
std::vector<AudioSegment> read_segments(const std::string& path);
std::vector<LabelRecord> read_label_records(const std::string& path);

}  // namespace pramana
