#pragma once

#include <iostream>

namespace volsplat::cli {

/// Exit codes: 0 success, 1 stage failure during a run, 2 usage or configuration error.
enum ExitCode { kOk = 0, kStageFailure = 1, kUsage = 2 };

/// Entry point of the `volsplat` command; usable in-process by tests.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace volsplat::cli
