#include "ndforge/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  ndforge::cli::Streams io{std::cout, std::cerr};
  return ndforge::cli::main_entry(args, io);
}
