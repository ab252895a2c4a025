#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mqttbed/net/client.hpp"
#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/telemetry/latency.hpp"

namespace mqttbed::telemetry {

struct ProbeConfig {
    net::Endpoint broker;
    std::string topic = "probe/latency";
    std::uint64_t count = 0;  // 0 = until stopped
    double interval_s = 1.0;
    std::uint8_t qos = 1;
    double loss_timeout_s = 120;
    std::string client_id_prefix = "latency-probe";
    std::optional<wire::Credentials> credentials;
};

/// Probe payload: {"seq": <n>, "sent_at": <seconds>}.
wire::Bytes probe_payload(std::uint64_t seq, double sent_at);
/// Returns (seq, sent_at) or nullopt for foreign payloads.
std::optional<std::pair<std::uint64_t, double>> parse_probe_payload(std::span<const std::uint8_t> payload);

/// End-to-end latency probe: a publisher and a subscriber in one process,
/// both timing against the same steady clock. Each sample's state label is
/// the one current when it was sent.
class LatencyProbe {
public:
    explicit LatencyProbe(ProbeConfig config);
    ~LatencyProbe();

    /// Connects the subscriber, then starts publishing. Throws
    /// net::NetworkError when the broker is unreachable.
    void start();
    /// Stops publishing, waits up to `drain` (capped by the loss timeout) for
    /// outstanding messages, then marks the rest lost.
    void stop(std::chrono::milliseconds drain = std::chrono::seconds(5));
    /// Blocks until `count` messages have been sent and settled.
    void wait_finished();

    void set_state(std::string label);
    std::vector<LatencySample> samples() const;
    std::uint64_t errors() const { return errors_; }

    /// Seconds on the probe clock.
    double now() const;

private:
    void publish_loop();
    void subscribe_loop();
    bool all_settled() const;

    ProbeConfig config_;
    std::chrono::steady_clock::time_point epoch_;
    smarthome::StopToken publish_stop_;
    std::atomic<bool> subscriber_stop_{false};
    std::thread publisher_;
    std::thread subscriber_;
    std::unique_ptr<net::MqttClient> sub_client_;

    mutable std::mutex mutex_;
    std::string state_ = kDefaultState;
    std::vector<LatencySample> samples_;
    std::atomic<bool> publishing_done_{false};
    std::atomic<std::uint64_t> errors_{0};
};

class ServiceDenied : public std::runtime_error {
public:
    ServiceDenied() : std::runtime_error("service denied") {}
};

/// Runs a probe for `config.count` messages and returns the samples.
/// Throws ServiceDenied when nothing was delivered.
std::vector<LatencySample> probe_run(const ProbeConfig& config);

}  // namespace mqttbed::telemetry
