#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cgmmd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. args excludes the
/// program name. Normal output goes to out; errors go to err as one JSON line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cgmmd::cli
