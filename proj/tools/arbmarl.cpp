#include <iostream>

#include "arbmarl/cli.hpp"

int main(int argc, char** argv) { return arbmarl::run_cli(argc, argv, std::cout, std::cerr); }
