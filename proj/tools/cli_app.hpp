#pragma once

#include <ostream>

namespace cqa::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kLicqFails = 3,
  kInfeasible = 4,
  kReproMismatch = 5,
};

/// Runs the cqa command line. Reports go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cqa::cli
