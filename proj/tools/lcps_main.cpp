#include "lcps/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return lcps::run_cli(argc, argv, std::cout, std::cerr);
}
