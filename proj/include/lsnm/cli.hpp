#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lsnm {

inline constexpr std::string_view version = "0.1.0";

/// Entry point of the `lsnm` tool. `args` excludes the program name.
/// Returns 0 on success, 2 on usage or configuration errors, 3 on numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsnm
