#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pramana/agreement.hpp"
#include "pramana/evaluators.hpp"
#include "pramana/manifest.hpp"
#include "pramana/textnorm.hpp"
#include "pramana/transcribers.hpp"

namespace pramana {

struct PipelineConfig {
  std::vector<TranscriberSpec> transcribers;
  AgreementConfig agreement;
  FilterConfig filter;
  NormalizationConfig normalization;
  int workers = 1;
  std::optional<std::string> checkpoint_path;
  bool ordered_output = true;
};

// Strict structural parse: unknown keys anywhere in the document are
// ConfigErrors, as are violated value constraints.
PipelineConfig pipeline_config_from_json(const nlohmann::json& doc);
nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::string& path);

// Rebases every relative file path in the config (replay tables, external
// score tables, checkpoint) onto base_dir, so a config file can name its
// companion files relative to itself. load_pipeline_config applies this
// with the config file's own directory.
void resolve_config_paths(PipelineConfig& cfg, const std::string& base_dir);

// Applies one "dotted.path=value" override onto the raw config document.
// Numeric path components index arrays; values parse as JSON scalars with
// a fallback to plain strings. Typos surface as unknown-key errors on the
// subsequent parse.
void apply_override(nlohmann::json& doc, const std::string& dotted_key,
                    const std::string& value);

// Hash of the labeling-relevant configuration. Runtime knobs that cannot
// change the records (workers, checkpoint_path) are excluded, so a resumed
// run may use a different worker count.
std::uint64_t config_hash(const PipelineConfig& cfg);

// Rewrites a base config into one of the four named experiment
// configurations. The base must define whichever components the preset
// pulls in: transcribers "rnnt"/"ctc", evaluators "sonar"/"rnnt_conf".
PipelineConfig ablation_preset(const std::string& name, const PipelineConfig& base);

struct DomainYield {
  double hours_input = 0.0;
  double hours_after_agreement = 0.0;
  double hours_after_filter = 0.0;
  std::size_t segments_input = 0;
  std::size_t segments_accepted = 0;
};

struct YieldReport {
  double hours_input = 0.0;
  double hours_after_agreement = 0.0;
  double hours_after_filter = 0.0;
  std::size_t segments_input = 0;
  std::size_t segments_accepted = 0;
  std::map<std::string, std::size_t> rejected;  // rejection reason -> count
  std::map<std::string, DomainYield> per_domain;
};

void accumulate(YieldReport& report, const LabelRecord& rec);
YieldReport recompute_yield(const std::vector<LabelRecord>& records);
nlohmann::json yield_report_to_json(const YieldReport& report);

// Post-transcription stages for one segment: agreement, evaluator scoring,
// filtering. Stateless per call and safe to share across workers.
class Labeler {
 public:
  explicit Labeler(const PipelineConfig& cfg);

  // per_transcriber holds one outcome per configured transcriber, in
  // configured order.
  LabelRecord label(const AudioSegment& seg,
                    const std::vector<TranscribeOutcome>& per_transcriber) const;

  void healthcheck() const;

 private:
  struct EvalCtx {
    EvaluatorSpec spec;
    std::shared_ptr<EmbeddingProvider> provider;
    std::unordered_map<std::string, double> external_scores;
  };

  double score_one(const EvalCtx& ctx, const AudioSegment& seg,
                   const TranscriptCandidate& selected) const;

  PipelineConfig cfg_;
  std::vector<EvalCtx> evals_;
};

struct RunOptions {
  bool resume = false;
  // Stop after writing this many records (0 = no limit). Exists so tests
  // can simulate a mid-run kill deterministically.
  std::size_t stop_after = 0;
  // Batch-level transcriber failures are retried this many times before
  // the run aborts.
  int batch_retries = 2;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// Streams the input manifest through transcription, agreement, and
// filtering into the output manifest, one LabelRecord per input segment.
// Throws ConfigError / DependencyError on fatal problems; per-segment
// failures land in the records instead.
YieldReport run_pipeline(const PipelineConfig& cfg, const std::string& input_manifest_path,
                         const std::string& output_manifest_path,
                         const RunOptions& opts = {});

}  // namespace pramana
