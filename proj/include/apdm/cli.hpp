#pragma once

#include <string>
#include <vector>

namespace apdm {

// Dispatches one CLI invocation. Exit codes: 0 success, 1 domain failure
// (training/metric/format errors), 2 usage failure (bad flags, bad config).
int run_cli(const std::vector<std::string>& args);

}  // namespace apdm
