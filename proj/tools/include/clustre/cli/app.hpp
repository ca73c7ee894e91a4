#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace clustre::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `clustre` tool. Returns 0 on success, 1 when a
// validation gate or a solver fails, 2 on config, argument or hypothesis errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

} // namespace clustre::cli
