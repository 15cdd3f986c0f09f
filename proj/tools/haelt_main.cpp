#include <string>
#include <vector>

#include "haelt/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return haelt::cli::run_cli(args);
}
