#include <iostream>

#include "zoge/runner.hpp"

int main(int argc, char** argv) { return zoge::cli_main(argc, argv, std::cout, std::cerr); }
