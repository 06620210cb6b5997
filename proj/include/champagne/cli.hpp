#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace champagne::cli {

/// Runs the command line `args` (without the program name). Results go to `out` or to the
/// files named by --out; the resolved configuration and diagnostics go to `err`.
/// Returns 0 on success, 1 on a computation error and 2 on a usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace champagne::cli
