#include <iostream>

#include "cntnet/cli.hpp"

int main(int argc, char** argv) { return cntnet::cli::run(argc, argv, std::cout, std::cerr); }
