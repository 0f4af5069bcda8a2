#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "heavycomb/errors.hpp"

namespace heavycomb::cli {

/// 0 success, 1 validation, 2 config/usage, 3 numerical failure.
int exit_code_for(ErrorCode code) noexcept;

/// Runs the command line `args` (without the program name). Tables go to
/// `out` unless --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace heavycomb::cli
