#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spinforge::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,      // bad arguments, unknown site, malformed input data
  kNumerical = 3,  // non-convergence or other numerical failure
  kIo = 4,         // unreadable or unwritable files
};

/// Runs one `spinforge` invocation in process.  `args` excludes the program
/// name.  Data goes to `out` unless --out is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spinforge::cli
