#pragma once

#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

namespace stresslab {

// A child process spoken to over line-delimited stdin/stdout.
// Used for metric adapters and external candidate providers.
class LineProcess {
 public:
  explicit LineProcess(const std::vector<std::string>& command);
  ~LineProcess();
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  // Writes one line (newline appended). Throws runtime_failure if the child
  // has closed its stdin.
  void send_line(const std::string& line);

  // Reads the next full line, waiting up to timeout_s. Returns nullopt on
  // clean EOF; throws runtime_failure on timeout or read error.
  std::optional<std::string> read_line(double timeout_s);

  void close_stdin();
  bool alive();
  void terminate();  // SIGKILL + reap
  const std::string& command_line() const { return command_line_; }

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool saw_eof_ = false;
  std::string command_line_;
};

}  // namespace stresslab
