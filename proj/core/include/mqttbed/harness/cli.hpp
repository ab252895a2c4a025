#pragma once

#include <iosfwd>

namespace mqttbed::harness {

/// Entry point for the mqttbed command line. Returns the process exit
/// status: 0 success, 1 failed run or verdict, 2 usage error.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mqttbed::harness
