#pragma once

#include <map>
#include <string>
#include <vector>

#include "pramana/embeddings.hpp"

namespace pramana {

enum class Aggregation { mean, min, product };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

// Per-token confidence from output distributions: the generalized entropy
// of order alpha, linearly rescaled so a uniform distribution scores 0 and
// a one-hot distribution scores 1, then aggregated across tokens.
// alpha must be > 0 and != 1.
// Throws ConfigError for bad alpha, EvaluatorInputError("no tokens") /
// ("invalid distribution") for bad inputs.
double renyi_confidence(const std::vector<std::vector<double>>& token_dists, double alpha,
                        Aggregation aggregation);

// dot(a,b) / (|a|*|b|), clamped into [-1,1] against rounding drift.
// Throws EvaluatorInputError("zero vector") / ("dimension mismatch").
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct EvaluatorSpec {
  std::string id;
  enum class Kind { confidence, embedding_similarity, external } kind = Kind::confidence;
  double rho = 0.0;

  // kind == confidence
  double alpha = 0.5;
  Aggregation aggregation = Aggregation::mean;

  // kind == embedding_similarity
  EmbeddingProviderSpec provider;
  bool use_normalized_text = false;

  // kind == external: JSONL table of {"id", "score"}
  std::string path;
};

enum class FilterComparison { ge, gt };

struct FilterConfig {
  std::vector<EvaluatorSpec> evaluators;
  int lambda = 0;
  FilterComparison comparison = FilterComparison::ge;
};

struct FilterResult {
  std::map<std::string, double> scores;
  std::map<std::string, int> passes;
  int filter_score = 0;
  bool accepted = false;
};

// Thresholds each evaluator score against its rho, sums the passes, and
// compares the sum to lambda. Throws ConfigError("incomplete scores") when
// a configured evaluator has no score entry.
FilterResult filter_decision(const std::map<std::string, double>& scores,
                             const FilterConfig& cfg);

}  // namespace pramana
