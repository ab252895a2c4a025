#pragma once

#include <cstdint>
#include <string>

#include "mqttbed/attacks/report.hpp"
#include "mqttbed/net/client.hpp"

namespace mqttbed::smarthome {
class StopToken;
}

namespace mqttbed::attacks {

struct StressConfig {
    std::size_t client_count = 1;
    std::size_t messages_per_client = 10;
    std::uint8_t qos = 1;
    std::size_t payload_size = 64;
    std::string topic = "stress/load";
    double connect_rate = 0;  // connections per second, 0 = unlimited
    std::size_t inflight_window = 10;
    double ack_timeout_s = 60;  // give up on a client after this long without progress
    std::string client_id_prefix = "stress";
    std::string bind_host;

    void validate() const;
};

struct StressReport {
    std::uint64_t client_count = 0;
    std::uint64_t connected = 0;
    std::uint64_t connect_failures = 0;
    std::uint64_t attempted = 0;
    std::uint64_t succeeded = 0;
    std::uint64_t failed = 0;
    std::uint64_t connections_lost = 0;
    double duration_s = 0;
    double throughput = 0;  // successful publishes per second

    AttackReport to_attack_report() const;
};

/// Runs client_count concurrent publishers. qos 1 counts a success on PUBACK,
/// qos 2 on PUBCOMP, qos 0 once the bytes are written. Refusals, timeouts and
/// dropped connections are tallied, never thrown.
StressReport stress(const StressConfig& config, const net::Endpoint& broker, smarthome::StopToken* stop = nullptr);

}  // namespace mqttbed::attacks
