#include "sepkit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sepkit::run_cli(argc, argv, std::cout, std::cerr); }
