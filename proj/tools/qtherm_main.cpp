#include <iostream>

#include "qtherm/cli.hpp"

int main(int argc, char** argv) {
  return qtherm::cli::main(argc, argv, std::cout, std::cerr);
}
