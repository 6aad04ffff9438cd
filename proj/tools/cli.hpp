#pragma once

#include <string>
#include <vector>

namespace tmsr::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

// Runs one command line (without the program name).
int run(const std::vector<std::string>& args);

}  // namespace tmsr::cli
