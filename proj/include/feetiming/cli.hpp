#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace feetiming {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitParse = 2,
    kExitDomain = 3,
    kExitNumerical = 4,
};

/// Entry point of the feetiming tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace feetiming
