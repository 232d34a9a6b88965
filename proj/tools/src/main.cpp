#include <iostream>

#include "urbanpos_cli/commands.hpp"

int main(int argc, char** argv) { return urbanpos::cli::run(argc, argv, std::cout, std::cerr); }
