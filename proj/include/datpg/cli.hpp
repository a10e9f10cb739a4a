#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace datpg {

// Runs one `datpg` invocation; args excludes the program name. Returns the
// process exit code: 0 ok, 1 selftest failure or internal error, 2 netlist /
// pattern input error, 3 fault-list error, 4 config error, 5 enumeration
// bound exceeded.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace datpg
