#pragma once

namespace ran::cli {

/// Dispatches the subcommands; returns the process exit code
/// (0 ok, 2 usage, 3 data, 4 numeric failure).
int run(int argc, const char* const* argv);

}  // namespace ran::cli
