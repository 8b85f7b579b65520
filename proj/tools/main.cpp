#include <iostream>
#include <string>
#include <vector>

#include "proxyctl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return proxyctl::run_cli(args, std::cout, std::cerr);
}
