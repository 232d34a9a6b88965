#pragma once

#include <iosfwd>

namespace urbanpos::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kEmpty = 3 };

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace urbanpos::cli
