#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mqttbed/broker/auth.hpp"
#include "mqttbed/broker/ban.hpp"
#include "mqttbed/broker/events.hpp"
#include "mqttbed/broker/policy.hpp"
#include "mqttbed/broker/session.hpp"
#include "mqttbed/broker/subscription_tree.hpp"
#include "mqttbed/wire/packet.hpp"

namespace mqttbed::broker {

struct SendBytes {
    ConnectionId connection = 0;
    wire::Bytes bytes;
};

/// Close after flushing anything already queued for the connection.
struct CloseConnection {
    ConnectionId connection = 0;
};

using BrokerAction = std::variant<SendBytes, CloseConnection>;

struct BrokerStats {
    std::uint64_t connections_accepted = 0;
    std::uint64_t connections_refused = 0;
    std::uint64_t auth_failures = 0;
    std::uint64_t bans = 0;
    std::uint64_t banned_refusals = 0;
    std::uint64_t publishes_received = 0;
    std::uint64_t deliveries = 0;
    std::uint64_t dropped_acl = 0;
    std::uint64_t dropped_oversize_message = 0;
    std::uint64_t dropped_inflight = 0;
    std::uint64_t closed_oversize_packet = 0;
    std::uint64_t protocol_errors = 0;
    std::uint64_t wills_published = 0;
};

struct ConnectOutcome {
    wire::Connack connack;
    bool accepted = false;
};

/// Protocol engine with no I/O. The transport feeds it bytes and connection
/// lifecycle events, then drains the resulting actions. Not thread-safe; the
/// caller serializes access.
class BrokerCore {
public:
    explicit BrokerCore(SecurityPolicy policy, EventSink* events = nullptr);

    BrokerCore(const BrokerCore&) = delete;
    BrokerCore& operator=(const BrokerCore&) = delete;

    void open(ConnectionId id, std::string source, TimePoint now);

    /// Appends stream bytes, enforces max_packet_size on each frame header and
    /// dispatches every complete packet.
    void receive(ConnectionId id, std::span<const std::uint8_t> data, TimePoint now);

    void handle(ConnectionId id, const wire::ControlPacket& packet, TimePoint now);

    /// Transport-level loss (EOF, reset). Treated as an abrupt disconnect.
    void connection_lost(ConnectionId id, TimePoint now);

    /// Enforces keep-alive with a 1.5x grace factor.
    void tick(TimePoint now);

    std::vector<BrokerAction> take_actions();

    ConnectOutcome handle_connect(ConnectionId id, const wire::Connect& packet, TimePoint now);
    void handle_subscribe(ConnectionId id, const wire::Subscribe& packet);
    void handle_publish(ConnectionId id, const wire::Publish& packet);
    void handle_disconnect(ConnectionId id, bool graceful, TimePoint now);
    BanDecision record_auth_failure(const std::string& source, TimePoint now);

    const SecurityPolicy& policy() const { return policy_; }
    const BrokerStats& stats() const { return stats_; }
    const std::map<std::string, RetainedMessage>& retained() const { return retained_; }
    const SessionState* session(const std::string& client_id) const;
    std::size_t connection_count() const { return connections_.size(); }
    bool is_open(ConnectionId id) const { return connections_.contains(id); }

private:
    struct Connection {
        std::string source;
        wire::Bytes inbuf;
        bool connected = false;
        std::string client_id;
        std::uint16_t keep_alive = 0;
        TimePoint last_activity{};
    };

    void send(ConnectionId id, const wire::ControlPacket& packet);
    void close(ConnectionId id, TimePoint now, bool publish_will);
    void event(std::string kind, const Connection* conn, std::string detail);
    void dispatch(ConnectionId id, Connection& conn, const wire::ControlPacket& packet, TimePoint now);

    void route(const Message& message);
    void deliver(SessionState& session, const Message& message, std::uint8_t qos, bool retain_flag);
    void resume(SessionState& session);
    void transmit(SessionState& session, std::uint16_t packet_id, const InflightMessage& msg, bool dup);
    void publish_will(SessionState& session);

    SecurityPolicy policy_;
    EventSink* events_;
    Authenticator auth_;
    std::optional<BanTable> bans_;

    std::unordered_map<ConnectionId, Connection> connections_;
    std::map<std::string, SessionState> sessions_;
    SubscriptionTree subscriptions_;
    std::map<std::string, RetainedMessage> retained_;
    std::vector<BrokerAction> actions_;
    BrokerStats stats_;
    std::uint64_t auto_id_counter_ = 0;
    TimePoint now_{};
};

}  // namespace mqttbed::broker
