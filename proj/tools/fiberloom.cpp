#include <iostream>

#include "fiberloom/cli.hpp"

int main(int argc, char** argv) { return fiberloom::cli::run(argc, argv, std::cout, std::cerr); }
