#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pramana/types.hpp"

namespace pramana {

struct EmbeddingProviderSpec {
  std::string id;
  enum class Kind { subprocess, http, replay, mock_bag_of_chars } kind = Kind::mock_bag_of_chars;
  // Expected vector length. 0 lets the mock provider derive it from the
  // alphabet; wire providers must state it.
  int dimension = 0;
  std::string command;   // subprocess kinds
  std::string endpoint;  // http kinds, e.g. "http://127.0.0.1:8400"
  std::string path;      // replay table (JSONL of {"id","vector"})
  // Fixed alphabet ordering for the bag-of-chars mock.
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  double timeout_s = 30.0;
};

// Replay lookup keys: text requests hash the UTF-8 bytes, audio requests
// use the segment id directly.
std::string text_embedding_key(std::string_view text);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual const EmbeddingProviderSpec& spec() const = 0;
  // Throws EvaluatorInputError when the provider cannot embed this input
  // ("embedding unavailable"); DependencyError on provider-level failure.
  virtual std::vector<double> embed_text(const std::string& text) = 0;
  virtual std::vector<double> embed_audio(const AudioSegment& segment) = 0;
  // Throws DependencyError when the backing resource is unusable.
  virtual void healthcheck() = 0;
};

// Builds the provider for a spec, wrapped in a per-key cache so repeated
// lookups of the same text/segment hit the backing provider once.
// Thread-safe; share one instance across workers.
std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderSpec& spec);

}  // namespace pramana
