#pragma once

#include <iosfwd>

namespace cafp {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // computation failure or unreadable input file
inline constexpr int kExitUsage = 2;    // unknown flag, invalid value, missing subcommand

// Runs the `cafp` command line. Normal output goes to `out`, diagnostics to
// `err`; files named by --out / --csv / --model-out are written directly.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cafp
