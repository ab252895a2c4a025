#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "mqttbed/net/client.hpp"
#include "mqttbed/smarthome/edge.hpp"
#include "mqttbed/smarthome/envelope.hpp"
#include "mqttbed/smarthome/sensor.hpp"

namespace mqttbed::smarthome {

/// Interruptible sleep shared by the periodic runners.
class StopToken {
public:
    void request_stop();
    bool stop_requested() const;
    /// Returns false when stop was requested before the deadline.
    bool sleep_until(std::chrono::steady_clock::time_point deadline);
    void reset();

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    bool stop_ = false;
};

struct DeviceOptions {
    SensorConfig sensor;
    net::Endpoint broker;
    std::optional<EnvelopeKey> envelope_key;
    std::optional<wire::Credentials> credentials;
    std::uint64_t max_ticks = 0;  // 0 = run until stopped
};

/// A simulated sensor publishing on its own connection at a fixed interval.
class DeviceRunner {
public:
    explicit DeviceRunner(DeviceOptions options);
    ~DeviceRunner();

    void start();
    void stop();

    /// Plain (pre-envelope) payloads in publish order.
    std::vector<wire::Bytes> published() const;
    /// Send time of each entry in published().
    std::vector<std::chrono::steady_clock::time_point> published_at() const;
    std::uint64_t errors() const { return errors_; }
    const DeviceOptions& options() const { return options_; }

private:
    void run();

    DeviceOptions options_;
    StopToken stop_;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::vector<wire::Bytes> published_;
    std::vector<std::chrono::steady_clock::time_point> published_at_;
    std::atomic<std::uint64_t> errors_{0};
};

struct EdgeOptions {
    EdgeRuleSet rules;
    net::Endpoint broker;
    std::string client_id = "edge-node";
    std::optional<wire::Credentials> credentials;
};

/// The edge node's event loop: subscribe to sensors, evaluate each message in
/// arrival order, publish the resulting commands.
class EdgeRunner {
public:
    explicit EdgeRunner(EdgeOptions options);
    ~EdgeRunner();

    void start();
    void stop();
    /// Blocks until the sensor subscriptions are acknowledged.
    bool wait_ready(std::chrono::milliseconds timeout);

    EdgeCounters counters() const;
    std::vector<EdgeDecision> decisions() const;

private:
    void run();

    EdgeOptions options_;
    EdgeNode node_;
    StopToken stop_;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::condition_variable ready_cv_;
    bool ready_ = false;
};

}  // namespace mqttbed::smarthome
