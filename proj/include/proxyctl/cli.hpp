#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace proxyctl {

// Entry point shared by the binary and the tests. args excludes the program
// name. Diagnostics go to err, data to files and out; returns the process
// exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace proxyctl
