#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pramana/textnorm.hpp"
#include "pramana/types.hpp"

namespace pramana {

// One scored slice of the corpus: pooled word edits over pooled reference
// words (micro-average), plus the slice's size.
struct SliceStats {
  double wer = 0.0;
  std::size_t utterances = 0;
  double minutes = 0.0;
};

bool operator==(const SliceStats& a, const SliceStats& b);

struct SystemReport {
  std::string system;
  SliceStats overall;               // micro: pooled over every utterance
  double overall_macro = 0.0;       // unweighted mean of per-domain WERs
  std::map<std::string, SliceStats> per_domain;
  std::map<std::string, SliceStats> per_bucket;  // duration-bucket label
};

bool operator==(const SystemReport& a, const SystemReport& b);

struct EvalReport {
  std::vector<SystemReport> systems;
};

bool operator==(const EvalReport& a, const EvalReport& b);

// Scores one hypothesis set (segment id -> hypothesis text) against the
// references. Every reference needs nonempty text and a hypothesis entry;
// extra hypothesis ids are ignored. Normalization is applied to both
// sides before word splitting.
SystemReport evaluate_system(const std::vector<AudioSegment>& references,
                             const std::map<std::string, std::string>& hypotheses,
                             const NormalizationConfig& norm,
                             const std::string& system_name);

// Multi-system wrapper; systems keep the given order and score
// independently of one another.
EvalReport evaluate(
    const std::vector<AudioSegment>& references,
    const std::vector<std::pair<std::string, std::map<std::string, std::string>>>& systems,
    const NormalizationConfig& norm);

enum class ReportFormat { text, csv, json };

ReportFormat report_format_from_string(std::string_view s);

// Deterministic rendering. Row order per system: domains (sorted), then
// duration buckets (sorted), then the overall rows with the micro "ALL"
// row last. CSV columns: system,section,key,wer,utterances,minutes.
std::string report_table(const EvalReport& report, ReportFormat format);

// Inverse of report_table(report, csv): parse_report_csv(render(r)) == r.
EvalReport parse_report_csv(const std::string& csv);

// Reads a hypothesis manifest: JSONL rows carrying "id" and "text"
// (pipeline output rows work too via accepted_text). Rows rejected by the
// pipeline are skipped when the file is a pipeline output manifest.
std::map<std::string, std::string> read_hypotheses(const std::string& path);

}  // namespace pramana
