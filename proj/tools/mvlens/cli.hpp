#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace mvlens::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitAnalysis = 3;

/// Runs one `mvlens` invocation. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace mvlens::cli
