#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vbl::cli {

enum ExitCode : int { kSuccess = 0, kComputeFailure = 1, kUsageError = 2 };

// Sets the spdlog level from VBL_LOG_LEVEL (trace, debug, info, warn, error, critical, off).
void configure_logging();

// Runs one invocation. `args` excludes the program name. Results meant for the caller
// (e.g. "m=3") go to `out`; diagnostics go to the log and to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vbl::cli
