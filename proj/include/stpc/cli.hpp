// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace stpc {

// Runs one CLI invocation. args excludes the program name. Returns the
// process exit code: 0 success, 1 validation/usage error, 2 runtime failure.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace stpc
