#include <vector>

#include "rsspred/cli.hpp"

int main(int argc, char** argv) {
    return rsspred::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
