#include <iostream>
#include <string>
#include <vector>

#include "polar/cli.h"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return polar::cli::run(args, std::cout, std::cerr);
}
