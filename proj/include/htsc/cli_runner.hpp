#pragma once

#include <string>
#include <vector>

namespace htsc::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Run one CLI invocation (argv without the program name).
/// Exit codes: 0 ok, 1 usage or data error, 2 numerical failure.
int run(const std::vector<std::string>& args);

}  // namespace htsc::cli
