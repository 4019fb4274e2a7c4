#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mjls::cli {

/// Stable exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kInputError = 1,
  kFiniteUnsolvable = 2,
  kNotInSetS = 3,
  kNotObservable = 4,
  kGareDiverged = 5,
};

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mjls::cli
