#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace anchoragg::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs the command line front end. Returns 0 on success, 2 for invalid
/// configuration or input, 3 for runtime failures.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace anchoragg::cli
