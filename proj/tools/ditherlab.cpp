#include <iostream>

#include "ditherlab/cli.hpp"

int main(int argc, char** argv) { return ditherlab::cli_main(argc, argv, std::cout, std::cerr); }
