// Command-line front end. Exit codes: 0 success, 1 usage error, 2 numerical
// non-convergence.
#pragma once

#include <ostream>

namespace ditherlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNonConvergence = 2;

/// Subcommands: simulate, bounds, regimes, fitp, estimate.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ditherlab
