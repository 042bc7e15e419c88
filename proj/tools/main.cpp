#include <iostream>

#include "ftnoc/cli.hpp"

int main(int argc, char** argv) { return ftnoc::cli_main(argc, argv, std::cout, std::cerr); }
