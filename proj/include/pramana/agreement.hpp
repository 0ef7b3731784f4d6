#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pramana/textnorm.hpp"
#include "pramana/types.hpp"

namespace pramana {

struct AgreementConfig {
  // Minimum matching score for two candidates to count as agreeing.
  double tau = 1.0;
  // A candidate is selectable when its agreement count exceeds delta
  // (strict >).
  int delta = 1;
  // Whether a candidate's agreement with itself contributes to its count.
  bool include_self = true;
};

struct AgreementResult {
  std::vector<std::vector<std::uint8_t>> matrix;  // N x N, entries 0/1
  std::vector<int> scores;                        // row sums
  // Index of the winning candidate; empty when no score clears delta.
  std::optional<std::size_t> selected;
  std::string reject_reason;  // "no agreement" when selected is empty
};

// Pairwise agreement of normalized candidate texts: entry (i,k) is 1 iff
// the matching score of candidates i and k reaches tau. The diagonal is
// forced to 1 (include_self) or 0 (otherwise).
std::vector<std::vector<std::uint8_t>> agreement_matrix(const CandidateSet& cands,
                                                        const AgreementConfig& cfg,
                                                        const NormalizationConfig& norm);

// Full selection: per-candidate agreement counts, then the candidate with
// the highest count wins if that count strictly exceeds delta. Ties go to
// the lowest index, which is the configured transcriber priority order.
// Throws ConfigError("no candidates") on an empty set.
AgreementResult select_pseudo_label(const CandidateSet& cands, const AgreementConfig& cfg,
                                    const NormalizationConfig& norm);

}  // namespace pramana
