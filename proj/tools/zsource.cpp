#include <iostream>
#include <string>
#include <vector>

#include "zsource/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return zsource::cli::run(args, std::cout, std::cerr);
}
