#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace codestop::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

/// Runs `codestop <args...>` in-process. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err);

}  // namespace codestop::cli
