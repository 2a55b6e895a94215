#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nounprobe {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 configuration error, 3 backend error,
// 4 analysis precondition failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitAnalysis = 4;

// Entry point of the nounprobe command. `args` excludes the program name.
// Failures print a one-line JSON error record to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nounprobe
