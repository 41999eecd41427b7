#include <iostream>
#include <string>
#include <vector>

#include "covdiff/harness.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return covdiff::cli_dispatch(args, std::cout, std::cerr);
}
