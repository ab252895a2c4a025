#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mqttbed/smarthome/envelope.hpp"
#include "mqttbed/wire/packet.hpp"

namespace mqttbed::smarthome {

struct EdgeRuleSet {
    double ac_threshold = 24.0;
    std::string ac_command_topic = "home/livingroom/ac/set";
    std::string light_command_topic = "home/hall/light/set";
    std::vector<std::string> sensor_filters{"home/+/temperature", "home/+/door"};
    std::optional<EnvelopeKey> envelope_key;
};

struct Command {
    std::string topic;
    bool on = false;

    /// {"state": "on"} / {"state": "off"}
    wire::Bytes payload() const;
    bool operator==(const Command&) const = default;
};

/// One accepted sensor reading and the command it produced.
struct EdgeDecision {
    std::string topic;
    std::optional<double> temperature;
    std::optional<bool> door_open;
    Command command;
};

struct EdgeCounters {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t rejected_mac = 0;
    std::uint64_t commands_emitted = 0;
    std::uint64_t ac_on = 0;
    std::uint64_t ac_off = 0;
    std::uint64_t light_on = 0;
    std::uint64_t light_off = 0;
};

/// The automation rules: AC follows the temperature threshold, the light
/// follows the door. Exactly one command per valid reading.
class EdgeNode {
public:
    explicit EdgeNode(EdgeRuleSet rules);

    /// Verifies the envelope (when a key is configured), parses the reading
    /// and returns the resulting commands. Invalid input yields none and
    /// bumps the rejection counter.
    std::vector<Command> evaluate(std::string_view topic, std::span<const std::uint8_t> payload);

    const EdgeRuleSet& rules() const { return rules_; }
    const EdgeCounters& counters() const { return counters_; }
    const std::vector<EdgeDecision>& decisions() const { return decisions_; }

private:
    EdgeRuleSet rules_;
    EdgeCounters counters_;
    std::vector<EdgeDecision> decisions_;
};

}  // namespace mqttbed::smarthome
