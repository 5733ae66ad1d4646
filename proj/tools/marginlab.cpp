#include <iostream>
#include <string>
#include <vector>

#include "marginlab/cli.hpp"

int main(int argc, char** argv) {
  return marginlab::run_cli(std::vector<std::string>(argv, argv + argc),
                            std::cout, std::cerr);
}
