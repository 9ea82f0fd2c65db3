#include <iostream>

#include "cafp/cli.hpp"

int main(int argc, char** argv) { return cafp::run_cli(argc, argv, std::cout, std::cerr); }
