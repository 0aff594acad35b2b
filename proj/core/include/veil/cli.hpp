#pragma once

#include "veil/config.hpp"

namespace veil {

// Full command-line entry point. Returns the process exit code:
// 0 success, 2 usage error (bad flags/values), 1 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace veil
