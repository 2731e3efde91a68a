// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "dacg/cli.hpp"

int main(int argc, char** argv) {
  return dacg::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
