#pragma once

#include <istream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mqttbed/broker/policy.hpp"
#include "mqttbed/broker/server.hpp"

namespace mqttbed::broker {

/// Broker posture plus where to listen and log.
///
/// Key-value file format, one directive per line; lines starting with '#'
/// are comments (a '#' elsewhere is data, e.g. inside an ACL filter):
///
///     listen 127.0.0.1:1883
///     allow_anonymous false
///     user edge s3cret!Pass
///     enforce_acl true
///     acl edge home/# readwrite
///     acl @anonymous public/# subscribe
///     max_packet_size 4096
///     message_size_limit 1024
///     max_inflight_bytes 65536
///     ban_policy 5 60 300
///     password_policy 8 3
///     event_log broker-events.jsonl
///
/// acl modes are publish, subscribe or readwrite. Sizes are bytes, 0 meaning
/// unlimited. ban_policy takes <max_failures> <window_s> <ban_s>, and
/// password_policy <min_length> <classes>; both accept "off".
struct BrokerConfig {
    SecurityPolicy policy;
    ListenAddress listen;
    std::optional<std::string> event_log;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

BrokerConfig parse_broker_config(std::istream& in);
BrokerConfig load_broker_config(const std::string& path);

/// JSON twin of the key-value format, used inside scenario files.
BrokerConfig broker_config_from_json(const nlohmann::json& j);

}  // namespace mqttbed::broker
