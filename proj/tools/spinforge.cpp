#include <iostream>
#include <string>
#include <vector>

#include "spinforge/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spinforge::cli::run(args, std::cout, std::cerr);
}
