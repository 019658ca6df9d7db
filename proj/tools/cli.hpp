#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hrc::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs the command line `args` (args[0] is the program name). Returns the
/// process exit code; failures print one JSON error line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hrc::cli
