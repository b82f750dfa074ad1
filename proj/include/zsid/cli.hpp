// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace zsid {

/// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
/// error, 3 data or dimension error, 4 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zsid
