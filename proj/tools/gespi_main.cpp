#include <iostream>

#include "gespi/cli_io.hpp"

int main(int argc, char** argv) {
  return gespi::run_cli(argc, argv, std::cout, std::cerr);
}
