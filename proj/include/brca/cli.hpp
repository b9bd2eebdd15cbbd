#pragma once

#include <iosfwd>

namespace brca {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad arguments or configuration
inline constexpr int kExitRuntime = 2;  // IO failure, bad checkpoint, divergence

/// Entry point of the `brca` tool: train | eval | experiment | inspect.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

const char* version();

}  // namespace brca
