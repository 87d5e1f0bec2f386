#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ed2::cli {

enum ExitCode : int { ok = 0, runtime_failure = 1, usage_error = 2 };

// Entry point behind the `ed2` executable. `args` excludes the program name.
// Subcommands: gen-data, cluster, train, bench, mbrl, report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ed2::cli
