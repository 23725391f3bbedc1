#pragma once

// Command-line front end. Subcommands: synth, fit, eval-normals, eval3d, align,
// gradcheck, init-model.
//
// Each subcommand resolves its configuration as defaults, then the JSON file
// given by --config, then explicitly passed flags, and writes the resolved
// configuration to <out>/config.json. Exit codes: 0 success, 2 configuration
// error, 3 IO error, 4 numerical failure or under-constrained problem.
// stdout receives one JSON line per run; progress goes to stderr.

#include <ostream>

namespace footfit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace footfit
