#include "dgs/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dgs::run_cli(argc, argv, std::cout, std::cerr); }
