#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tradecert::cli {

enum ExitCode : int {
  kOk = 0,
  kNegative = 1,
  kInputError = 2,
  kResourceError = 3,
};

/// Runs one command line (args[0] is the program name). Machine output goes
/// to `out`, diagnostics and progress to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tradecert::cli
