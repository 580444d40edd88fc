#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitComputation = 3;

/// Runs the `reid` command line (arguments without the program name).
/// Returns the process exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reid::cli
