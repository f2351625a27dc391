#include "fusedec/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include "fusedec/error.hpp"

namespace fusedec {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

LineStream::LineStream(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {
  ignore_sigpipe();
}

LineStream::~LineStream() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

void LineStream::shutdown() noexcept {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) {
    ::close(write_fd_);
    write_fd_ = -1;
  } else if (write_fd_ >= 0) {
    ::shutdown(write_fd_, SHUT_WR);
  }
}

void LineStream::write_line(std::string_view line) {
  std::string data(line);
  data += '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    if (write_fd_ < 0) throw Error(ErrorCode::ScorerUnavailable, "stream closed for writing");
    ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ScorerUnavailable, std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineStream::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      throw Error(ErrorCode::ScorerTimeout, "no reply within " + std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(remaining.count(), 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ScorerUnavailable, std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[65536];
    ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw Error(ErrorCode::ScorerUnavailable, std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      std::string rest = std::move(buffer_);
      buffer_.clear();
      return rest;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

std::vector<char*> c_argv(const std::vector<std::string>& argv) {
  std::vector<char*> out;
  out.reserve(argv.size() + 1);
  for (const auto& a : argv) out.push_back(const_cast<char*>(a.c_str()));
  out.push_back(nullptr);
  return out;
}

void close_pair(int p[2]) {
  if (p[0] >= 0) ::close(p[0]);
  if (p[1] >= 0) ::close(p[1]);
}

}  // namespace

ChildProcess::ChildProcess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(ErrorCode::ScorerUnavailable, "empty command");
  ignore_sigpipe();
  int to_child[2] = {-1, -1};
  int from_child[2] = {-1, -1};
  int exec_status[2] = {-1, -1};
  if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0 || ::pipe2(exec_status, O_CLOEXEC) != 0) {
    close_pair(to_child);
    close_pair(from_child);
    close_pair(exec_status);
    throw Error(ErrorCode::ScorerUnavailable, "pipe() failed");
  }
  auto args = c_argv(argv);
  pid_ = ::fork();
  if (pid_ < 0) {
    close_pair(to_child);
    close_pair(from_child);
    close_pair(exec_status);
    throw Error(ErrorCode::ScorerUnavailable, "fork() failed");
  }
  if (pid_ == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    close_pair(to_child);
    close_pair(from_child);
    ::close(exec_status[0]);
    ::execvp(args[0], args.data());
    int err = errno;
    (void)!::write(exec_status[1], &err, sizeof err);
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::close(exec_status[1]);
  int err = 0;
  ssize_t n = ::read(exec_status[0], &err, sizeof err);
  ::close(exec_status[0]);
  if (n > 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
    throw Error(ErrorCode::ScorerUnavailable,
                "cannot execute '" + argv[0] + "': " + std::strerror(err));
  }
  stream_ = std::make_unique<LineStream>(from_child[0], to_child[1]);
}

ChildProcess::~ChildProcess() {
  stream_.reset();
  if (pid_ > 0) {
    // Give the child a moment to exit on EOF before forcing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
}

ProcessOutput run_process(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(ErrorCode::IoError, "empty command");
  int out_pipe[2] = {-1, -1};
  int err_pipe[2] = {-1, -1};
  int exec_status[2] = {-1, -1};
  if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 || ::pipe2(exec_status, O_CLOEXEC) != 0) {
    close_pair(out_pipe);
    close_pair(err_pipe);
    close_pair(exec_status);
    throw Error(ErrorCode::IoError, "pipe() failed");
  }
  auto args = c_argv(argv);
  pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::IoError, "fork() failed");
  if (pid == 0) {
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    close_pair(out_pipe);
    close_pair(err_pipe);
    ::close(exec_status[0]);
    ::execvp(args[0], args.data());
    int err = errno;
    (void)!::write(exec_status[1], &err, sizeof err);
    ::_exit(127);
  }
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  ::close(exec_status[1]);
  int exec_err = 0;
  ssize_t n = ::read(exec_status[0], &exec_err, sizeof exec_err);
  ::close(exec_status[0]);

  ProcessOutput result;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&result.out, &result.err};
  int open_fds = 2;
  while (open_fds > 0) {
    if (::poll(fds, 2, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      char chunk[4096];
      ssize_t r = ::read(fds[i].fd, chunk, sizeof chunk);
      if (r > 0) {
        sinks[i]->append(chunk, static_cast<std::size_t>(r));
      } else if (r == 0 || errno != EINTR) {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (n > 0) {
    throw Error(ErrorCode::IoError, "cannot execute '" + argv[0] + "': " + std::strerror(exec_err));
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < command.size()) {
    while (i < command.size() && (command[i] == ' ' || command[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < command.size() && command[i] != ' ' && command[i] != '\t') ++i;
    if (start < i) parts.emplace_back(command.substr(start, i - start));
  }
  return parts;
}

}  // namespace fusedec
