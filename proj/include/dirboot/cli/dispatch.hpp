#pragma once

#include "dirboot/cli/config.hpp"

#include <ostream>

namespace dirboot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPipeline = 2;

/// Runs a validated configuration, writing results and manifest.json under
/// config.out. Throws UsageError for problems with the inputs.
void dispatch(const RunConfig& config, std::ostream& out);

/// parse_config + dispatch with exceptions mapped to exit statuses.
int run(const CommandLine& flags, std::ostream& out, std::ostream& err);

}  // namespace dirboot::cli
