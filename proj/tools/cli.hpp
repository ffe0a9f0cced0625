#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ptalign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. Normal output goes to `out`; the resolved run
/// manifest (JSON) and diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ptalign::cli
