#include <iostream>

#include "chadkit_cli/commands.hpp"

int main(int argc, char** argv) {
  return chadkit::cli::run(argc, argv, std::cout, std::cerr);
}
