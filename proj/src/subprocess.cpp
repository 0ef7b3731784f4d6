#include "pramana/subprocess.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pramana/errors.hpp"

namespace pramana {

namespace {

std::once_flag g_sigpipe_once;

// A dead child must surface as a write error, not a process-killing signal.
void ignore_sigpipe() {
  std::call_once(g_sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

LineProcess::LineProcess(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) {
    throw DependencyError("pipe failed: " + std::string(std::strerror(errno)));
  }
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw DependencyError("pipe failed: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    throw DependencyError("fork failed: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

LineProcess::~LineProcess() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    // Give the child a moment to exit on stdin EOF, then escalate.
    int status = 0;
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) return;
      ::usleep(10 * 1000);
    }
    ::kill(pid_, SIGTERM);
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) return;
      ::usleep(10 * 1000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

void LineProcess::write_line(const std::string& line) {
  std::string data = line;
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw DependencyError("write to child failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

LineProcess::ReadStatus LineProcess::read_line(std::string& out, double timeout_s) {
  const double deadline = now_s() + timeout_s;
  for (;;) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return ReadStatus::ok;
    }
    const double remaining = deadline - now_s();
    if (remaining <= 0.0) return ReadStatus::timeout;
    struct pollfd pfd;
    pfd.fd = from_child_;
    pfd.events = POLLIN;
    const int pr = ::poll(&pfd, 1, static_cast<int>(remaining * 1000.0) + 1);
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw DependencyError("poll on child failed: " + std::string(std::strerror(errno)));
    }
    if (pr == 0) return ReadStatus::timeout;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw DependencyError("read from child failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) {
      if (!buffer_.empty()) {
        out = std::move(buffer_);
        buffer_.clear();
        return ReadStatus::ok;
      }
      return ReadStatus::eof;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineProcess::kill_now() {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
}

}  // namespace pramana
