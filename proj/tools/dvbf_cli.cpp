#include <iostream>
#include <string>
#include <vector>

#include "dvbf/cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return dvbf::cli::run(args, std::cout, std::cerr);
}
