#pragma once

#include <string>
#include <vector>

namespace setpred {

// Command-line entry point. args excludes the program name. Exit codes:
// 0 success, 1 configuration error, 2 data/format error, 3 divergence.
int run_cli(const std::vector<std::string>& args);

}  // namespace setpred
