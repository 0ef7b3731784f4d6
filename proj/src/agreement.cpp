#include "pramana/agreement.hpp"

#include <algorithm>

#include "pramana/errors.hpp"

namespace pramana {

std::vector<std::vector<std::uint8_t>> agreement_matrix(const CandidateSet& cands,
                                                        const AgreementConfig& cfg,
                                                        const NormalizationConfig& norm) {
  const std::size_t n = cands.candidates.size();
  std::vector<std::string> texts(n);
  for (std::size_t i = 0; i < n; ++i) {
    texts[i] = normalize(cands.candidates[i].text, norm);
  }
  std::vector<std::vector<std::uint8_t>> m(n, std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = cfg.include_self ? 1 : 0;
    for (std::size_t k = i + 1; k < n; ++k) {
      const std::uint8_t hit = matching_score(texts[i], texts[k]).value >= cfg.tau ? 1 : 0;
      m[i][k] = hit;
      m[k][i] = hit;
    }
  }
  return m;
}

AgreementResult select_pseudo_label(const CandidateSet& cands, const AgreementConfig& cfg,
                                    const NormalizationConfig& norm) {
  if (cands.candidates.empty()) {
    throw ConfigError("no candidates");
  }
  AgreementResult res;
  res.matrix = agreement_matrix(cands, cfg, norm);
  const std::size_t n = cands.candidates.size();
  res.scores.resize(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int c = 0;
    for (std::size_t k = 0; k < n; ++k) c += res.matrix[i][k];
    res.scores[i] = c;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (res.scores[i] > res.scores[best]) best = i;  // ties keep the lower index
  }
  if (res.scores[best] > cfg.delta) {
    res.selected = best;
  } else {
    res.reject_reason = "no agreement";
  }
  return res;
}

}  // namespace pramana
