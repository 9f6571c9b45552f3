#include <iostream>
#include <string>
#include <vector>

#include "fkmad/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fkmad::run_cli(args, std::cout, std::cerr);
}
