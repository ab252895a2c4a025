#pragma once

#include <cstdint>

namespace mqttbed::util {

/// Raises the soft open-file limit towards the hard limit. Returns the new
/// soft limit.
std::uint64_t raise_fd_limit(std::uint64_t wanted = 65536);

}  // namespace mqttbed::util
