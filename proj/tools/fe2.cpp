#include "fe2/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return fe2::cli::main(argc, argv, std::cout, std::cerr);
}
