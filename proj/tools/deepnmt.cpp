#include <iostream>
#include <string>
#include <vector>

#include "deepnmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return deepnmt::run_cli(args, std::cout, std::cerr);
}
