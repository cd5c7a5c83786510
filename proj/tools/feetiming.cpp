#include <iostream>
#include <string>
#include <vector>

#include "feetiming/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return feetiming::run_cli(args, std::cout, std::cerr);
}
