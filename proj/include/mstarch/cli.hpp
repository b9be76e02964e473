#pragma once

#include <string>
#include <vector>

namespace mstarch {

// Entry point shared by the mstarch binary and the CLI tests. `args`
// excludes the program name. Exit codes: 0 success, 1 usage/validation,
// 2 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace mstarch
