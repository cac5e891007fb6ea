#include <iostream>

#include "mdpn/cli.hpp"

int main(int argc, char** argv) { return mdpn::cli::run_cli(argc, argv, std::cout, std::cerr); }
