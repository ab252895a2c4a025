#include "mqttbed/smarthome/edge.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace mqttbed::smarthome {

wire::Bytes Command::payload() const {
    return wire::to_bytes(on ? "{\"state\": \"on\"}" : "{\"state\": \"off\"}");
}

EdgeNode::EdgeNode(EdgeRuleSet rules) : rules_(std::move(rules)) {
    if (!std::isfinite(rules_.ac_threshold)) throw std::invalid_argument("ac_threshold must be finite");
}

std::vector<Command> EdgeNode::evaluate(std::string_view topic, std::span<const std::uint8_t> payload) {
    wire::Bytes body;
    if (rules_.envelope_key) {
        auto opened = open_wire(payload, topic, *rules_.envelope_key);
        if (!opened) {
            ++counters_.rejected;
            ++counters_.rejected_mac;
            return {};
        }
        body = std::move(*opened);
    } else {
        body.assign(payload.begin(), payload.end());
    }

    auto doc = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
    EdgeDecision decision;
    decision.topic = std::string(topic);
    if (doc.is_object() && doc.contains("temperature") && doc["temperature"].is_number() &&
        std::isfinite(doc["temperature"].get<double>())) {
        double t = doc["temperature"].get<double>();
        decision.temperature = t;
        decision.command = Command{rules_.ac_command_topic, t > rules_.ac_threshold};
        ++(decision.command.on ? counters_.ac_on : counters_.ac_off);
    } else if (doc.is_object() && doc.contains("door_state") && doc["door_state"].is_string() &&
               (doc["door_state"] == "open" || doc["door_state"] == "closed")) {
        bool open = doc["door_state"] == "open";
        decision.door_open = open;
        decision.command = Command{rules_.light_command_topic, open};
        ++(open ? counters_.light_on : counters_.light_off);
    } else {
        ++counters_.rejected;
        return {};
    }
    ++counters_.accepted;
    ++counters_.commands_emitted;
    decisions_.push_back(decision);
    return {decision.command};
}

}  // namespace mqttbed::smarthome
