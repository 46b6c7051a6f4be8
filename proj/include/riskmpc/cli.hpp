#pragma once

#include <string>
#include <vector>

namespace riskmpc {

/// Exit codes: 0 success, 1 usage or validation error, 2 runtime error.
int cli_main(int argc, const char* const* argv);

/// args excludes the program name.
int cli_main(const std::vector<std::string>& args);

}  // namespace riskmpc
