#pragma once

#include <string>
#include <vector>

namespace faux {

// Runs one fauxaudit invocation; `args` excludes the program name.
// Exit codes: 0 success, 2 validation error, 3 numeric divergence.
int run_cli(const std::vector<std::string>& args);

}  // namespace faux
