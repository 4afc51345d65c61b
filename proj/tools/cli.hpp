#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dbar {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitBudget = 5,
  kExitOracle = 6,
};

/// Entry point shared by the dbar binary and the tests. JSON-lines output
/// goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace dbar
