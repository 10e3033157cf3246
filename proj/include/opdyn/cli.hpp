#pragma once

#include <string>
#include <vector>

namespace opdyn::cli {

/// Entry point behind the binary: returns 0 on success, 1 on input errors,
/// 2 on numerical failures.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace opdyn::cli
