#include <iostream>

#include "seeds/cli.hpp"

int main(int argc, char** argv) { return seeds::cli::run(argc, argv, std::cout, std::cerr); }
