#include "pramana/evaluators.hpp"

#include <algorithm>
#include <cmath>

#include "pramana/errors.hpp"

namespace pramana {

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::mean:
      return "mean";
    case Aggregation::min:
      return "min";
    case Aggregation::product:
      return "product";
  }
  return "mean";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "min") return Aggregation::min;
  if (s == "product") return Aggregation::product;
  throw ConfigError("unknown aggregation: " + std::string(s));
}

double renyi_confidence(const std::vector<std::vector<double>>& token_dists, double alpha,
                        Aggregation aggregation) {
  if (alpha <= 0.0 || alpha == 1.0) {
    throw ConfigError("invalid alpha: must be > 0 and != 1");
  }
  if (token_dists.empty()) {
    throw EvaluatorInputError("no tokens");
  }
  std::vector<double> per_token;
  per_token.reserve(token_dists.size());
  for (const auto& dist : token_dists) {
    if (dist.size() < 2) {
      throw EvaluatorInputError("invalid distribution");
    }
    double sum = 0.0;
    double pow_sum = 0.0;
    for (double p : dist) {
      if (p < 0.0 || !std::isfinite(p)) {
        throw EvaluatorInputError("invalid distribution");
      }
      sum += p;
      pow_sum += std::pow(p, alpha);
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw EvaluatorInputError("invalid distribution");
    }
    const double entropy = std::log(pow_sum) / (1.0 - alpha);
    double c = 1.0 - entropy / std::log(static_cast<double>(dist.size()));
    c = std::clamp(c, 0.0, 1.0);
    per_token.push_back(c);
  }
  switch (aggregation) {
    case Aggregation::mean: {
      double s = 0.0;
      for (double c : per_token) s += c;
      return s / static_cast<double>(per_token.size());
    }
    case Aggregation::min:
      return *std::min_element(per_token.begin(), per_token.end());
    case Aggregation::product: {
      double p = 1.0;
      for (double c : per_token) p *= c;
      return p;
    }
  }
  return 0.0;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw EvaluatorInputError("dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw EvaluatorInputError("zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

FilterResult filter_decision(const std::map<std::string, double>& scores,
                             const FilterConfig& cfg) {
  FilterResult res;
  for (const EvaluatorSpec& ev : cfg.evaluators) {
    auto it = scores.find(ev.id);
    if (it == scores.end()) {
      throw ConfigError("incomplete scores: no score for evaluator '" + ev.id + "'");
    }
    const int pass = it->second >= ev.rho ? 1 : 0;
    res.scores[ev.id] = it->second;
    res.passes[ev.id] = pass;
    res.filter_score += pass;
  }
  res.accepted = cfg.comparison == FilterComparison::ge ? res.filter_score >= cfg.lambda
                                                        : res.filter_score > cfg.lambda;
  return res;
}

}  // namespace pramana
