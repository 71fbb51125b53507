#pragma once

#include <string>
#include <vector>

namespace msglmb {

/// Entry point behind the `msglmb` command-line tool. `args` excludes the
/// program name. Subcommands: simulate, track, evaluate, ablate.
/// Exit codes: 0 success, 2 parse/usage error, 3 runtime error.
int run_command(const std::vector<std::string>& args);

}  // namespace msglmb
