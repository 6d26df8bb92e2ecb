#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace densesvm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point for the densesvm tool: extract, train, tune, eval, serve, predict.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace densesvm::cli
