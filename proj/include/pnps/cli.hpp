#pragma once

#include <iosfwd>

namespace pnps::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // validation or usage error
inline constexpr int kExitIo = 2;

/// Parses argv and runs one subcommand. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pnps::cli
