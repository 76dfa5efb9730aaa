#include <iostream>
#include <string>
#include <vector>

#include "gpuplan/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gpuplan::dispatch_command(args, std::cout, std::cerr);
}
