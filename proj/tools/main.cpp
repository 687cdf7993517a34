#include <iostream>
#include <string>
#include <vector>

#include "attmiss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return attmiss::run_cli(args, std::cout, std::cerr);
}
