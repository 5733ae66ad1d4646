#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace marginlab {

// Exit codes of the margin-lab tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAssumption = 2;  // assumption or separability failure
inline constexpr int kExitNumeric = 3;     // NonFinite
inline constexpr int kExitAssert = 4;      // --assert check failed

// Entry point of the tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace marginlab
