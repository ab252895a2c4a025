#include "mqttbed/attacks/stress.hpp"

#include <atomic>
#include <map>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/util/time.hpp"

namespace mqttbed::attacks {

void StressConfig::validate() const {
    if (client_count == 0) throw std::invalid_argument("client_count must be positive");
    if (messages_per_client == 0) throw std::invalid_argument("messages_per_client must be positive");
    if (payload_size == 0) throw std::invalid_argument("payload_size must be positive");
    if (qos > 2) throw std::invalid_argument("qos must be 0, 1 or 2");
    if (inflight_window == 0) throw std::invalid_argument("inflight_window must be positive");
    if (connect_rate < 0) throw std::invalid_argument("connect_rate must be non-negative");
    if (topic.empty()) throw std::invalid_argument("topic must not be empty");
}

AttackReport StressReport::to_attack_report() const {
    AttackReport r;
    r.kind = "dos";
    r.duration_s = duration_s;
    r.counters = {{"clients", client_count}, {"connected", connected}, {"attempted", attempted},
                  {"succeeded", succeeded},  {"failed", failed}};
    r.errors = {{"connect_failures", connect_failures}, {"connections_lost", connections_lost}};
    r.details["throughput_msg_s"] = throughput;
    r.outcome = failed == 0 ? "completed" : (succeeded == 0 ? "all-failed" : "degraded");
    return r;
}

namespace {

struct Shared {
    std::atomic<std::uint64_t> connected{0};
    std::atomic<std::uint64_t> connect_failures{0};
    std::atomic<std::uint64_t> succeeded{0};
    std::atomic<std::uint64_t> connections_lost{0};
};

void worker(const StressConfig& cfg, const net::Endpoint& broker, std::size_t index,
            std::chrono::steady_clock::time_point connect_at, Shared& shared, smarthome::StopToken* stop) {
    if (stop) {
        if (!stop->sleep_until(connect_at)) return;
    } else {
        std::this_thread::sleep_until(connect_at);
    }
    net::ClientOptions opts;
    opts.broker = broker;
    opts.client_id = cfg.client_id_prefix + "-" + std::to_string(index);
    opts.bind_host = cfg.bind_host;
    opts.connect_timeout = net::Millis(static_cast<long>(cfg.ack_timeout_s * 1000));
    net::MqttClient client(opts);
    try {
        if (client.connect().return_code != 0) {
            ++shared.connect_failures;
            return;
        }
    } catch (const std::exception&) {
        ++shared.connect_failures;
        return;
    }
    ++shared.connected;

    const wire::Bytes payload(cfg.payload_size, 'x');
    const auto ack_timeout = net::Millis(static_cast<long>(cfg.ack_timeout_s * 1000));
    std::map<std::uint16_t, bool> outstanding;  // id -> PUBREC seen
    std::size_t sent = 0;
    try {
        while (sent < cfg.messages_per_client || !outstanding.empty()) {
            if (stop && stop->stop_requested()) break;
            while (sent < cfg.messages_per_client && outstanding.size() < cfg.inflight_window) {
                auto id = client.publish(cfg.topic, payload, cfg.qos);
                ++sent;
                if (cfg.qos == 0)
                    ++shared.succeeded;
                else
                    outstanding.emplace(id, false);
            }
            if (outstanding.empty()) continue;
            auto packet = client.next_control(ack_timeout);
            if (!packet) {
                if (!client.connected()) ++shared.connections_lost;
                break;
            }
            if (auto* a = std::get_if<wire::Puback>(&*packet)) {
                if (outstanding.erase(a->packet_id)) ++shared.succeeded;
            } else if (auto* rec = std::get_if<wire::Pubrec>(&*packet)) {
                if (auto it = outstanding.find(rec->packet_id); it != outstanding.end()) {
                    it->second = true;
                    client.send(wire::Pubrel{rec->packet_id});
                }
            } else if (auto* comp = std::get_if<wire::Pubcomp>(&*packet)) {
                if (outstanding.erase(comp->packet_id)) ++shared.succeeded;
            }
        }
        client.disconnect();
    } catch (const std::exception&) {
        ++shared.connections_lost;
    }
}

}  // namespace

StressReport stress(const StressConfig& config, const net::Endpoint& broker, smarthome::StopToken* stop) {
    config.validate();
    Shared shared;
    auto start = std::chrono::steady_clock::now();
    std::vector<std::thread> threads;
    threads.reserve(config.client_count);
    for (std::size_t i = 0; i < config.client_count; ++i) {
        auto at = start;
        if (config.connect_rate > 0)
            at += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(static_cast<double>(i) / config.connect_rate));
        threads.emplace_back(worker, std::cref(config), std::cref(broker), i, at, std::ref(shared), stop);
    }
    for (auto& t : threads) t.join();

    StressReport r;
    r.client_count = config.client_count;
    r.connected = shared.connected;
    r.connect_failures = shared.connect_failures;
    r.attempted = static_cast<std::uint64_t>(config.client_count) * config.messages_per_client;
    r.succeeded = shared.succeeded;
    r.failed = r.attempted - r.succeeded;
    r.connections_lost = shared.connections_lost;
    r.duration_s = util::seconds_between(start, std::chrono::steady_clock::now());
    r.throughput = r.duration_s > 0 ? static_cast<double>(r.succeeded) / r.duration_s : 0;
    return r;
}

}  // namespace mqttbed::attacks
