// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return medzs::cli::run(argc, argv, std::cout, std::cerr); }
