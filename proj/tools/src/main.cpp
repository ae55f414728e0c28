#include <iostream>

#include "weaksqz_cli/cli.hpp"

int main(int argc, char** argv) { return weaksqz::cli_main(argc, argv, std::cout, std::cerr); }
