#pragma once

#include <string>
#include <vector>

namespace histfun::cli {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code: 0 on success, 1 on a
/// runtime failure, 2 on a usage error. Failures print one JSON object
/// {"error": {"kind", "message"}} to stderr.
int run(const std::vector<std::string>& args);

}  // namespace histfun::cli
