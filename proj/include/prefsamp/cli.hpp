#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prefsamp {

namespace exit_code {
constexpr int ok = 0;
constexpr int validation = 1;
constexpr int numerical = 2;
constexpr int convergence = 3;
}  // namespace exit_code

/// Parses and runs one `prefsamp` command line (program name first).
/// Reports errors on `err` and returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prefsamp
