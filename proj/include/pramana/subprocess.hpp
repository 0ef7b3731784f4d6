#pragma once

#include <string>

#include <sys/types.h>

namespace pramana {

// A child process spoken to over stdin/stdout pipes, one line at a time.
// Used by the subprocess transcriber/embedding adapters.
class LineProcess {
 public:
  // Spawns `command` via /bin/sh -c. Throws DependencyError on failure.
  explicit LineProcess(const std::string& command);
  ~LineProcess();

  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  enum class ReadStatus { ok, eof, timeout };

  // Writes one line (newline appended). Throws DependencyError when the
  // child has gone away.
  void write_line(const std::string& line);

  // Reads the next newline-terminated line, waiting up to timeout_s.
  // A final unterminated line before EOF is still delivered as `ok`.
  ReadStatus read_line(std::string& out, double timeout_s);

  // Terminates the child immediately (used after protocol violations so
  // the next batch starts from a clean slate).
  void kill_now();

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace pramana
