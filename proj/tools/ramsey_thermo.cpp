#include "ramsey/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ramsey::cli::dispatch(argc, argv, std::cout, std::cerr); }
