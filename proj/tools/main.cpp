#include <iostream>
#include <string>
#include <vector>

#include "trustroute/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return trustroute::run_cli(args, std::cout, std::cerr);
}
