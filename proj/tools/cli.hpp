#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qbe::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,       // bad arguments, unwritable or occupied output directory
  kValidation = 2,  // malformed or invalid model file, bad overrides
  kNumeric = 3,     // solver failure or a violated invariant
};

/// Runs one CLI invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qbe::cli
