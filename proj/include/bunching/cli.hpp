#pragma once

#include <ostream>
#include <string_view>
#include <vector>

namespace bunching::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// `start:stop:step` (inclusive of stop within 1e-9 steps) or `a,b,c`.
std::vector<double> parse_real_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

/// Runs one subcommand. Errors are reported on `err` as a JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bunching::cli
