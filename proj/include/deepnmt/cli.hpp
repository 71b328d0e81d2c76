#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deepnmt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Runs one command-line invocation; `args` excludes the program name.
/// Subcommands: train | analyze | decode | bench | avg.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deepnmt
