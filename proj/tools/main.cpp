#include "pnps/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return pnps::cli::run(argc, argv, std::cout, std::cerr);
}
