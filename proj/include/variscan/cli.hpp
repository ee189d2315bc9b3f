#pragma once

#include <string>
#include <vector>

namespace variscan::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataValidation = 2,
  kNumerical = 3,
  kArtifactMismatch = 4,
};

// Runs one subcommand; errors are reported on stderr and mapped to ExitCode.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace variscan::cli
