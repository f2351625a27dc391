#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fusedec {

/// Newline-delimited text over a pair of file descriptors (pipes or a
/// socket). Not thread-safe; callers serialize access.
class LineStream {
 public:
  /// Takes ownership of both descriptors (they may be the same fd).
  LineStream(int read_fd, int write_fd);
  ~LineStream();
  LineStream(const LineStream&) = delete;
  LineStream& operator=(const LineStream&) = delete;

  /// Appends '\n'. Throws Error{ScorerUnavailable} if the peer is gone.
  void write_line(std::string_view line);
  /// Next line without its terminator; nullopt on end of stream.
  /// Throws Error{ScorerTimeout} when nothing arrives within `timeout`.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  void shutdown() noexcept;

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

/// A spawned child with piped stdin/stdout; stderr is inherited.
/// Destruction closes the pipes, then terminates and reaps the child.
class ChildProcess {
 public:
  /// argv[0] is resolved through PATH. Throws Error{ScorerUnavailable}.
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  LineStream& stream() noexcept { return *stream_; }
  int pid() const noexcept { return pid_; }

 private:
  int pid_ = -1;
  std::unique_ptr<LineStream> stream_;
};

struct ProcessOutput {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs argv to completion without a shell, capturing stdout and stderr.
/// Throws Error{IoError} if the process cannot be started.
ProcessOutput run_process(const std::vector<std::string>& argv);

/// Splits a command line on whitespace; no quoting or expansion.
std::vector<std::string> split_command(std::string_view command);

/// Process-wide: writes to a vanished peer raise errors instead of SIGPIPE.
void ignore_sigpipe();

}  // namespace fusedec
