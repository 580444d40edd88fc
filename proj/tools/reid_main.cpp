#include <iostream>
#include <string>
#include <vector>

#include "reid/cli.hpp"

int main(int argc, char** argv) {
  return reid::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
