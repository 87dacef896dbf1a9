#include "stresslab/line_process.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "stresslab/error.hpp"

namespace stresslab {

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string join_command(const std::vector<std::string>& command) {
  std::string out;
  for (const std::string& part : command) {
    if (!out.empty()) out += ' ';
    out += part;
  }
  return out;
}

}  // namespace

LineProcess::LineProcess(const std::vector<std::string>& command)
    : command_line_(join_command(command)) {
  if (command.empty()) throw validation_error("adapter command must be non-empty");
  ignore_sigpipe_once();

  int to_pipe[2];    // parent -> child stdin
  int from_pipe[2];  // child stdout -> parent
  if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0)
    throw runtime_failure("pipe() failed: " + std::string(std::strerror(errno)));

  pid_ = fork();
  if (pid_ < 0) throw runtime_failure("fork() failed: " + std::string(std::strerror(errno)));
  if (pid_ == 0) {
    dup2(to_pipe[0], STDIN_FILENO);
    dup2(from_pipe[1], STDOUT_FILENO);
    close(to_pipe[0]);
    close(to_pipe[1]);
    close(from_pipe[0]);
    close(from_pipe[1]);
    std::vector<char*> argv;
    argv.reserve(command.size() + 1);
    for (const std::string& part : command) argv.push_back(const_cast<char*>(part.c_str()));
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(to_pipe[0]);
  close(from_pipe[1]);
  to_child_ = to_pipe[1];
  from_child_ = from_pipe[0];
}

LineProcess::~LineProcess() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
}

void LineProcess::send_line(const std::string& line) {
  std::string payload = line;
  payload += '\n';
  std::size_t off = 0;
  while (off < payload.size()) {
    ssize_t n = write(to_child_, payload.data() + off, payload.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw runtime_failure("adapter [" + command_line_ +
                            "] closed its input: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineProcess::read_line(double timeout_s) {
  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(timeout_s));
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (saw_eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0)
      throw runtime_failure("adapter [" + command_line_ + "] timed out after " +
                            std::to_string(timeout_s) + "s");
    struct pollfd pfd = {from_child_, POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw runtime_failure("poll() failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) continue;  // loop re-checks deadline
    char chunk[4096];
    ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw runtime_failure("read from adapter failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0)
      saw_eof_ = true;
    else
      buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineProcess::close_stdin() {
  if (to_child_ >= 0) {
    close(to_child_);
    to_child_ = -1;
  }
}

bool LineProcess::alive() {
  if (pid_ <= 0) return false;
  int status = 0;
  pid_t rc = waitpid(pid_, &status, WNOHANG);
  if (rc == pid_) {
    pid_ = -1;
    return false;
  }
  return rc == 0;
}

void LineProcess::terminate() {
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
}

}  // namespace stresslab
