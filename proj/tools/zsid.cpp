// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "zsid/cli.hpp"

int main(int argc, char** argv) { return zsid::run_cli(argc, argv, std::cout, std::cerr); }
