#include "vmld/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return vmld::run_cli(argc, argv, std::cout, std::cerr); }
