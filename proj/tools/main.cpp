#include <iostream>
#include <string>
#include <vector>

#include "cvmc/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return cvmc::cli::main_entry(args, std::cout, std::cerr);
}
