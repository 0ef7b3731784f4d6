#pragma once

#include <stdexcept>
#include <string>

namespace pramana {

// Invalid configuration, bad CLI usage, or malformed input files.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// An external dependency (child process, HTTP endpoint, replay file)
// is unreachable or unusable. The CLI maps this to exit code 3.
class DependencyError : public std::runtime_error {
 public:
  explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

// A transcriber broke its wire contract at batch level (bad handshake,
// malformed response line, non-200 HTTP status). The pipeline retries the
// batch a configured number of times before treating it as fatal.
class TranscriberError : public DependencyError {
 public:
  explicit TranscriberError(const std::string& msg) : DependencyError(msg) {}
};

// A single segment could not be scored by an evaluator (no confidence
// source, missing embedding, degenerate vector). The pipeline records the
// segment as rejected instead of aborting.
class EvaluatorInputError : public std::runtime_error {
 public:
  explicit EvaluatorInputError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pramana
