#include <iostream>

#include "culcap/cli.hpp"

int main(int argc, char** argv) {
  return culcap::run_cli(argc, argv, std::cout, std::cerr);
}
