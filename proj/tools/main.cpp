#include <iostream>

#include "mqttbed/harness/cli.hpp"
#include "mqttbed/util/system.hpp"

int main(int argc, char** argv) {
    mqttbed::util::raise_fd_limit();
    return mqttbed::harness::cli_dispatch(argc, argv, std::cout, std::cerr);
}
