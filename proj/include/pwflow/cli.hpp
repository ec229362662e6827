#pragma once

namespace pwflow::cli {

// Dispatches argv to a subcommand pipeline.  Exit codes: 0 success (including
// negative analysis results), 2 unknown subcommand, 3 invalid configuration,
// 4 numerical failure surfaced from a module (diagnostic JSON emitted).
int run(int argc, char** argv);

}  // namespace pwflow::cli
