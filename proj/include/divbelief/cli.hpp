#pragma once

#include <iosfwd>

namespace divbelief::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// Entry point behind the `divbelief` executable. Human-readable output goes
/// to `out`, diagnostics to `err`; files are written only under --out.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace divbelief::cli
