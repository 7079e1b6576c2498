// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line entry point: curate, annotate, describe, metrics, evaluate.
//
// Exit codes: 0 success, 1 partial failure, 2 usage or configuration error.
// Option values come from flags, then GEOANNOT_<OPTION> environment variables,
// then the JSON object named by --config.

#include <ostream>
#include <string>
#include <vector>

namespace geoannot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char* const* argv);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geoannot
