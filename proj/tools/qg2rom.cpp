#include <iostream>

#include "qg2rom/cli.hpp"

int main(int argc, char** argv) { return qg2rom::run_cli(argc, argv, std::cout, std::cerr); }
