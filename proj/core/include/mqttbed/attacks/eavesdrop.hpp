#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mqttbed/attacks/report.hpp"
#include "mqttbed/net/client.hpp"

namespace mqttbed::smarthome {
class StopToken;
}

namespace mqttbed::attacks {

struct EavesdropConfig {
    net::Endpoint broker;
    std::string filter = "#";
    std::optional<wire::Credentials> credentials;
    std::string client_id = "eavesdropper";
    std::string bind_host;
    std::string output_csv;  // empty: rows kept in memory only
    double duration_s = 60;
    std::uint64_t max_messages = 0;  // 0 = no cap
};

struct CaptureRow {
    std::string timestamp;
    std::string topic;
    std::string payload;  // escaped text
};

struct EavesdropResult {
    AttackReport report;
    std::vector<CaptureRow> rows;
    /// Window in which the subscription was live (SUBACK to last read).
    std::optional<std::chrono::steady_clock::time_point> subscribed_at;
    std::optional<std::chrono::steady_clock::time_point> capture_end;
};

/// Connects (anonymously unless credentials are given), subscribes to the
/// filter and records every delivered message until the duration elapses.
/// Outcomes: "captured", "access denied", "subscription denied",
/// "connection failed".
EavesdropResult eavesdrop(const EavesdropConfig& config, smarthome::StopToken* stop = nullptr);

void write_capture_csv(const std::string& path, const std::vector<CaptureRow>& rows);
std::vector<CaptureRow> read_capture_csv(const std::string& path);

}  // namespace mqttbed::attacks
