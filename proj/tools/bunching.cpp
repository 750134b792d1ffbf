#include <iostream>

#include "bunching/cli.hpp"

int main(int argc, char** argv) { return bunching::cli::run(argc, argv, std::cout, std::cerr); }
