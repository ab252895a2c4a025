#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "mqttbed/broker/policy.hpp"
#include "mqttbed/wire/packet.hpp"

namespace mqttbed::broker {

using ConnectionId = std::uint64_t;

struct Message {
    std::string topic;
    wire::Bytes payload;
    std::uint8_t qos = 0;
    bool retain = false;

    std::size_t footprint() const { return topic.size() + payload.size(); }
};

enum class OutboundStage { AwaitPuback, AwaitPubrec, AwaitPubcomp };

struct InflightMessage {
    Message message;
    OutboundStage stage = OutboundStage::AwaitPuback;
};

struct RetainedMessage {
    wire::Bytes payload;
    std::uint8_t qos = 0;
};

/// Per-client broker state. Outlives the connection when clean_session is
/// false.
struct SessionState {
    std::string client_id;
    bool clean_session = true;
    Principal principal;
    std::map<std::string, std::uint8_t> subscriptions;
    std::map<std::uint16_t, InflightMessage> inflight_out;
    std::deque<Message> queued;
    std::set<std::uint16_t> inbound_qos2;  // PUBREC sent, PUBREL not yet seen
    std::optional<wire::WillMessage> will;
    bool connected = false;
    std::optional<ConnectionId> connection;
    std::uint16_t next_packet_id = 1;

    std::uint64_t denied_publishes = 0;
    std::uint64_t shed_deliveries = 0;

    /// Bytes held for this session: unacknowledged outbound plus offline queue.
    std::size_t held_bytes() const;
    std::uint16_t allocate_packet_id();
};

}  // namespace mqttbed::broker
