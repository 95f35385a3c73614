#include <iostream>

#include "divbelief/cli.hpp"

int main(int argc, char** argv) {
    return divbelief::cli::run(argc, argv, std::cout, std::cerr);
}
