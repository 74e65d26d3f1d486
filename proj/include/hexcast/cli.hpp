#pragma once

namespace hexcast::cli {

// Parses argv and dispatches to the subcommands (synth, aggregate, train,
// eval, sweep, report). Returns the process exit code: 0 on success, 1 for
// usage and configuration errors, 2 for data errors.
int run(int argc, const char* const* argv);

}  // namespace hexcast::cli
