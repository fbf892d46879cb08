#include <iostream>

#include "acf/cli.hpp"

int main(int argc, char** argv) { return acf::cli::run(argc, argv, std::cout, std::cerr); }
