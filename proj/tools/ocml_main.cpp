#include <iostream>

#include "ocml/cli.hpp"

int main(int argc, char** argv) { return ocml::run_cli(argc, argv, std::cout, std::cerr); }
