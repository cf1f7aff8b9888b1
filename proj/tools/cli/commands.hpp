#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lidsn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericAbort = 3 };

/// Parses `args` (program name first) and runs the selected subcommand. Failures print
/// one line "error[<kind>]: <message>" to `err`, kind being usage, data or numeric.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count for fold-level parallelism: LIDSN_THREADS when set, else the hardware
/// concurrency (at least 1).
std::size_t worker_threads();

}  // namespace lidsn::cli
