#include <iostream>

#include "brca/cli.hpp"

int main(int argc, char** argv) { return brca::run_cli(argc, argv, std::cout, std::cerr); }
