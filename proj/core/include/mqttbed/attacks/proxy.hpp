#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mqttbed/attacks/report.hpp"
#include "mqttbed/attacks/tamper.hpp"
#include "mqttbed/broker/server.hpp"
#include "mqttbed/net/client.hpp"

namespace mqttbed::attacks {

struct ProxyConfig {
    broker::ListenAddress listen{"127.0.0.1", 0};
    net::Endpoint upstream;
    std::vector<TamperRule> rules;
};

struct ProxyCounters {
    std::uint64_t connections = 0;
    std::uint64_t upstream_failures = 0;
    std::uint64_t packets_relayed = 0;  // client -> broker frames
    std::uint64_t publishes = 0;
    std::uint64_t tampered = 0;
    std::uint64_t rule_does_not_fit = 0;
    std::uint64_t not_json = 0;
    std::uint64_t malformed_passthrough = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
};

/// One PUBLISH seen on the client -> broker path.
struct PublishRecord {
    std::string topic;
    std::size_t encoded_in = 0;
    std::size_t encoded_out = 0;
    TamperStatus status = TamperStatus::NotMatched;
    wire::Bytes original_payload;
    wire::Bytes forwarded_payload;
};

/// Inline TCP relay between victims and the broker. Client -> broker PUBLISH
/// packets go through tamper_rewrite (first rule that changes the packet
/// wins); everything else, including bytes that fail to decode, is relayed
/// untouched. Each accepted connection gets its own upstream connection.
class MitmProxy {
public:
    explicit MitmProxy(ProxyConfig config);
    ~MitmProxy();

    MitmProxy(const MitmProxy&) = delete;
    MitmProxy& operator=(const MitmProxy&) = delete;

    void start();
    void stop();
    std::uint16_t port() const;

    /// Swaps the active rule list; an empty list makes the proxy a plain relay.
    void set_rules(std::vector<TamperRule> rules);

    ProxyCounters counters() const;
    std::vector<PublishRecord> records() const;
    AttackReport report() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mqttbed::attacks
