#pragma once

#include <cstdlib>
#include <iosfwd>
#include <string>
#include <vector>

#include "subqrag/config.hpp"

namespace subqrag::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitMissingArtifact = 3;
inline constexpr int kExitRuntime = 4;

// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = [](const char* name) { return std::getenv(name); });

}  // namespace subqrag::cli
