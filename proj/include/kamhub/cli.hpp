#pragma once

#include <string>
#include <vector>

namespace kamhub {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Entry point behind the `kamhub` executable. args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace kamhub
