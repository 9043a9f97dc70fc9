#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctxmlc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;      // bad arguments or configuration
inline constexpr int kExitData = 2;       // unreadable or malformed input
inline constexpr int kExitNumerical = 3;  // divergence or failed gradient check

/// Runs the command line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxmlc
