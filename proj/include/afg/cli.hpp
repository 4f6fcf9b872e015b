#pragma once

#include <ostream>
#include <string_view>

namespace afg::cli {

inline constexpr std::string_view kToolVersion = "afg 0.1.0";

// Exit codes: 0 success, 1 invalid input or missing prerequisite, 2 runtime
// failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace afg::cli
