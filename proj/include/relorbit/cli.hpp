#pragma once

namespace relorbit::cli {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv, runs one subcommand and returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace relorbit::cli
