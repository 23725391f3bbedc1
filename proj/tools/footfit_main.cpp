#include "footfit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return footfit::run_cli(argc, argv, std::cout, std::cerr); }
