// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dacg {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,     // bad flags, bad config file, incompatible checkpoint
  kExitData = 3,       // unreadable or unpaired data
  kExitNumerical = 4,  // non-finite values during training
  kExitGradCheck = 5,
};

/// args excludes the program name. Data goes to out, diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dacg
