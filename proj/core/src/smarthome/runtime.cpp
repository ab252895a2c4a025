#include "mqttbed/smarthome/runtime.hpp"

namespace mqttbed::smarthome {

using namespace std::chrono_literals;

void StopToken::request_stop() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    cv_.notify_all();
}

bool StopToken::stop_requested() const {
    std::lock_guard lock(mutex_);
    return stop_;
}

bool StopToken::sleep_until(std::chrono::steady_clock::time_point deadline) {
    std::unique_lock lock(mutex_);
    return !cv_.wait_until(lock, deadline, [this] { return stop_; });
}

void StopToken::reset() {
    std::lock_guard lock(mutex_);
    stop_ = false;
}

// ---------------------------------------------------------------------------

DeviceRunner::DeviceRunner(DeviceOptions options) : options_(std::move(options)) {
    options_.sensor.validate();
}

DeviceRunner::~DeviceRunner() { stop(); }

void DeviceRunner::start() {
    if (thread_.joinable()) return;
    stop_.reset();
    thread_ = std::thread([this] { run(); });
}

void DeviceRunner::stop() {
    stop_.request_stop();
    if (thread_.joinable()) thread_.join();
}

std::vector<wire::Bytes> DeviceRunner::published() const {
    std::lock_guard lock(mutex_);
    return published_;
}

std::vector<std::chrono::steady_clock::time_point> DeviceRunner::published_at() const {
    std::lock_guard lock(mutex_);
    return published_at_;
}

void DeviceRunner::run() {
    SensorSimulator sim(options_.sensor);
    net::ClientOptions co;
    co.broker = options_.broker;
    co.client_id = options_.sensor.name;
    co.credentials = options_.credentials;
    co.keep_alive = 30;
    net::MqttClient client(co);
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(options_.sensor.publish_interval_s));

    auto next = std::chrono::steady_clock::now();
    while (!stop_.stop_requested()) {
        if (options_.max_ticks > 0 && sim.tick() >= options_.max_ticks) break;
        try {
            if (!client.connected()) {
                auto ack = client.connect();
                if (ack.return_code != 0) {
                    ++errors_;
                    if (!stop_.sleep_until(std::chrono::steady_clock::now() + 500ms)) break;
                    continue;
                }
            }
            auto plain = sim.next();
            wire::Bytes wire_payload =
                options_.envelope_key ? seal(plain, options_.sensor.topic, *options_.envelope_key).to_wire() : plain;
            bool ok = options_.sensor.qos == 0
                          ? (client.publish(options_.sensor.topic, wire_payload, 0), true)
                          : client.publish_confirmed(options_.sensor.topic, wire_payload, options_.sensor.qos,
                                                     false, 5000ms);
            if (!ok) ++errors_;
            {
                std::lock_guard lock(mutex_);
                published_.push_back(std::move(plain));
                published_at_.push_back(std::chrono::steady_clock::now());
            }
        } catch (const std::exception&) {
            ++errors_;
            client.abort();
            if (!stop_.sleep_until(std::chrono::steady_clock::now() + 200ms)) break;
            continue;
        }
        next += interval;
        if (!stop_.sleep_until(next)) break;
    }
    client.disconnect();
}

// ---------------------------------------------------------------------------

EdgeRunner::EdgeRunner(EdgeOptions options) : options_(std::move(options)), node_(options_.rules) {}

EdgeRunner::~EdgeRunner() { stop(); }

void EdgeRunner::start() {
    if (thread_.joinable()) return;
    stop_.reset();
    thread_ = std::thread([this] { run(); });
}

void EdgeRunner::stop() {
    stop_.request_stop();
    if (thread_.joinable()) thread_.join();
}

bool EdgeRunner::wait_ready(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return ready_cv_.wait_for(lock, timeout, [this] { return ready_; });
}

EdgeCounters EdgeRunner::counters() const {
    std::lock_guard lock(mutex_);
    return node_.counters();
}

std::vector<EdgeDecision> EdgeRunner::decisions() const {
    std::lock_guard lock(mutex_);
    return node_.decisions();
}

void EdgeRunner::run() {
    net::ClientOptions co;
    co.broker = options_.broker;
    co.client_id = options_.client_id;
    co.credentials = options_.credentials;
    co.keep_alive = 30;
    net::MqttClient client(co);

    while (!stop_.stop_requested()) {
        try {
            if (!client.connected()) {
                auto ack = client.connect();
                if (ack.return_code != 0) {
                    if (!stop_.sleep_until(std::chrono::steady_clock::now() + 500ms)) break;
                    continue;
                }
                std::vector<wire::Subscription> subs;
                for (const auto& f : options_.rules.sensor_filters) subs.push_back({f, 0});
                if (!client.subscribe(subs, 5000ms)) {
                    client.abort();
                    continue;
                }
                {
                    std::lock_guard lock(mutex_);
                    ready_ = true;
                }
                ready_cv_.notify_all();
            }
            auto msg = client.next_message(100ms);
            if (!msg) continue;
            std::vector<Command> commands;
            {
                std::lock_guard lock(mutex_);
                commands = node_.evaluate(msg->topic, msg->payload);
            }
            for (const auto& c : commands) client.publish(c.topic, c.payload(), 0);
        } catch (const std::exception&) {
            client.abort();
            if (!stop_.sleep_until(std::chrono::steady_clock::now() + 200ms)) break;
        }
    }
    client.disconnect();
}

}  // namespace mqttbed::smarthome
