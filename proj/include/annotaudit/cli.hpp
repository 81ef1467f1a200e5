#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace annotaudit::cli {

/// Exit codes: 0 success, 2 usage or validation errors, 1 internal errors.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace annotaudit::cli
