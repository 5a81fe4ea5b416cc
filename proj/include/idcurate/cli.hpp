#pragma once

#include <iosfwd>

namespace idcurate::cli {

/// Exit codes: 0 success, 1 validation error or bad usage, 2 runtime error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace idcurate::cli
