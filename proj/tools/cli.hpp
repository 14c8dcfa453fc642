#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace jvcqma::cli {

/// Exit codes: 0 success, 1 pipeline failure, 2 usage error, 3 stale model.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitStale = 3;

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jvcqma::cli
