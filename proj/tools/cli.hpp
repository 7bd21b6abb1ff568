#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stencilml::cli {

/// Runs one `stencilml` invocation. `args` excludes the program name.
/// Returns the process exit status: 0 success, 2 usage, 3 data error, 4 numerical error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stencilml::cli
