#pragma once

#include <string>
#include <string_view>

namespace unseen {

struct ProcessResult {
  int exit_code = -1;  // 127 when the shell could not find the command
  std::string out;
  std::string err;
};

// Runs `command` through /bin/sh -c, feeding `input` on stdin and capturing
// stdout/stderr. Throws Error(Io) if the process cannot be spawned at all.
ProcessResult run_shell(const std::string& command, std::string_view input);

}  // namespace unseen
