#pragma once

namespace graphsolver::cli {

/// Runs one subcommand. Returns 0 on success, 2 for bad flags and 1 for
/// runtime failures; errors are one JSON line on stderr.
int run(int argc, const char* const* argv);

}  // namespace graphsolver::cli
