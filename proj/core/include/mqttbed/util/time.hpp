#pragma once

#include <chrono>
#include <string>

namespace mqttbed::util {

/// UTC, millisecond precision: 2024-05-01T12:00:00.123Z
std::string iso8601(std::chrono::system_clock::time_point t);
inline std::string iso8601_now() { return iso8601(std::chrono::system_clock::now()); }

inline double seconds_between(std::chrono::steady_clock::time_point a,
                              std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace mqttbed::util
