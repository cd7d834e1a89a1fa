#include <iostream>

#include "spgmc/cli.hpp"

int main(int argc, char** argv) { return spgmc::cli::run(argc, argv, std::cout, std::cerr); }
