#include <iostream>

#include <neuroqc/cli.hpp>

int main(int argc, char** argv) {
    return neuroqc::cli::run(argc, argv, std::cerr);
}
