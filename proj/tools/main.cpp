#include <iostream>
#include <string>
#include <vector>

#include "attnsense/cli.hpp"

int main(int argc, char** argv) {
    return attnsense::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
