#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attnpipe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the attnpipe tool: run | serve | eval | simulate |
/// gen-synthetic. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attnpipe
