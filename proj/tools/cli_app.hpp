#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trustrepair::cli {

/// Runs the command-line tool. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trustrepair::cli
