// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

#include "medzs/error.hpp"

namespace medzs::cli {

/// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitLlm = 2,
  kExitConfig = 3,
  kExitManifest = 4,
};

int exit_code_for(ErrorCode code);

/// Runs the command line `argv` (argv[0] is the program name) writing
/// results to `out` and diagnostics to `err`. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace medzs::cli
