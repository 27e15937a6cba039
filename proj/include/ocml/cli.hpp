#pragma once

#include <iosfwd>

namespace ocml {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitEstimation = 4;

// Entry point of the `ocml` tool: generate | estimate | tune | refute | bench.
// Reports go to --out (or stdout); errors are written to `err` as a JSON
// object {"error": {"kind": ..., "message": ...}}.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ocml
