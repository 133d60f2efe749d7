#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mdmtl::cli {

/// Runs the command line `args` (args[0] is the program name). Returns the
/// process exit code: 0 on success, nonzero on any error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mdmtl::cli
