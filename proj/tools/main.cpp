#include <string>
#include <vector>

#include "msglmb/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return msglmb::run_command(args);
}
