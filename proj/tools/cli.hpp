#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace voi_twin::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,        // unknown flag, bad flag value, missing subcommand
  kExitConfig = 3,       // malformed or invalid scenario / options
  kExitMissingFile = 4,  // an input path does not exist
  kExitNumerical = 5,
  kExitBadInput = 6,     // input file exists but cannot be parsed
};

// args excludes the program name. Diagnostics go to err, reports to out.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voi_twin::cli
