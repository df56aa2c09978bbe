#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ebmix::cli {

// Runs the ebmix command line. Returns the process exit code; errors are
// written to `err` as a single `ERROR <category>: <message>` line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ebmix::cli
