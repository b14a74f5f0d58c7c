#pragma once

#include <string>
#include <vector>

namespace etsim {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitDivergence = 2,
  kExitAssertion = 3,
};

// Entry point of the etsim tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace etsim
