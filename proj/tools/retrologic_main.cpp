#include <iostream>

#include "retrologic/pipeline/cli.hpp"

int main(int argc, char** argv) { return retrologic::cli_main(argc, argv, std::cout, std::cerr); }
