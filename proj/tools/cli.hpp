#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bushold::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kDiverged = 3 };

/// Runs one busctl invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bushold::cli
