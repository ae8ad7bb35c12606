#pragma once

#include <iosfwd>

namespace retrologic {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// The `retrologic` command line. Output goes to `out`, reports and usage
/// text to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace retrologic
