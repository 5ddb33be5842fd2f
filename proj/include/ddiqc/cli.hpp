#pragma once

// Command dispatch for the analysis tool. Each subcommand maps to one
// library analysis, reads/writes the formats in ddiqc/io.hpp, and emits a
// machine-readable JSON report (schema "report/1") that echoes enough
// configuration to re-run the analysis exactly. Identical argv, input
// files, and seeds produce byte-identical reports except for the
// timing_seconds field.

#include <iosfwd>
#include <string>
#include <vector>

namespace ddiqc::cli {

struct CommandResult {
    // 0 success (a refuting decision is still a successful analysis),
    // 1 I/O or numeric failure, 2 violated analysis premise / degenerate or
    // unbounded data, 3 usage error.
    int exit_code = 0;
    std::string stdout_text;  // JSON report (or help text); may be empty
    std::string stderr_text;  // diagnostic message; empty on success
};

// args excludes the program name: {"gain", "--in", "traj.csv", ...}.
CommandResult run_command(const std::vector<std::string>& args);

// Convenience wrapper printing the two texts to the given streams.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

const char* tool_version();

}  // namespace ddiqc::cli
