#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace trustroute {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kRuntime = 1;  // provider or runtime failure
inline constexpr int kUsage = 2;    // bad flags, config or input files
}  // namespace exit_code

/// Entry point of the `trustroute` command. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trustroute
