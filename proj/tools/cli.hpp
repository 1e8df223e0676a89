// SPDX-License-Identifier: Apache-2.0
// Command-line front end: prepare, train, eval, explain, synth, gradcheck.
#pragma once

#include <ostream>

namespace newsattn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;

/// Parses argv and runs one subcommand. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace newsattn::cli
