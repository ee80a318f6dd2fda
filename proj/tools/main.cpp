#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return legimpact::cli_dispatch(argc, argv, std::cout, std::cerr); }
