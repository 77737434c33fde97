#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace catmc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (without the program name), e.g.
// {"generate", "--d1", "4", ...}. Returns the process exit status:
// 0 success, 1 runtime or numeric failure, 2 usage or validation error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace catmc::cli
