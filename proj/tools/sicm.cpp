#include <iostream>

#include "sicm/cli.hpp"

int main(int argc, char** argv) {
  return sicm::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
