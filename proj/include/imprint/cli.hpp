#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace imprint {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,  // bad arguments, unknown subcommand, invalid config
    kExitData = 3,   // unreadable or inconsistent data, folds, checkpoints
    kExitDiverged = 4,
};

/// Runs one invocation. `args` excludes the program name. Diagnostics go to
/// `err`; with --json, `out` carries a single JSON document.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace imprint
