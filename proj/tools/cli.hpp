#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace freqattack::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kOracleError = 4,
  kAttackFailed = 5,
};

// Runs one command line (args exclude the program name). Diagnostics go to
// `err`, human-readable results to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace freqattack::cli
