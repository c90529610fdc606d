#include <iostream>

#include "poet/commands.hpp"

int main(int argc, char** argv) { return poet::cli::main_entry(argc, argv, std::cout, std::cerr); }
