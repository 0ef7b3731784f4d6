#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pramana/types.hpp"

namespace pramana {

struct TranscriberSpec {
  std::string id;
  enum class Kind { subprocess, http, replay } kind = Kind::replay;
  std::string command;   // subprocess: spawned via /bin/sh -c
  std::string endpoint;  // http: scheme://host:port
  std::string path;      // replay: JSONL table of reply objects
  int batch_size = 16;
  double timeout_s = 30.0;
  int max_inflight = 1;
};

// One pseudo-transcriber behind a uniform batch interface. Implementations
// serialize access internally, so a single instance may be shared across
// pipeline workers.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual const TranscriberSpec& spec() const = 0;

  // Returns exactly one outcome per input segment, in input order.
  // Per-segment failures (timeouts, missing replies) are carried in the
  // outcomes; batch-level protocol breakage throws TranscriberError.
  virtual std::vector<TranscribeOutcome> transcribe_batch(
      const std::vector<AudioSegment>& segments) = 0;

  // Verifies the backing resource (spawn + handshake / endpoint probe /
  // file readability). Throws DependencyError when unusable.
  virtual void healthcheck() = 0;
};

std::shared_ptr<Transcriber> make_transcriber(const TranscriberSpec& spec);

}  // namespace pramana
