#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polysketch::cli {

inline constexpr const char* kToolkitVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationError = 1, kIoError = 2 };

/// Runs one subcommand. `args` excludes the program name. Reports go to
/// `out`; failures are written to `err` as one line of JSON.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polysketch::cli
