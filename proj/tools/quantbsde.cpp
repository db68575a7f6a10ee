#include "quantbsde/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return quantbsde::cli::run(argc, argv, std::cout, std::cerr);
}
