#include "mqttbed/broker/core.hpp"

#include <algorithm>

#include "mqttbed/broker/acl.hpp"
#include "mqttbed/wire/codec.hpp"
#include "mqttbed/wire/topic.hpp"

namespace mqttbed::broker {

namespace {

constexpr auto kConnectTimeout = std::chrono::seconds(30);

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe(const wire::Bytes& payload) {
    return std::to_string(payload.size()) + " bytes";
}

}  // namespace

std::size_t SessionState::held_bytes() const {
    std::size_t total = 0;
    for (const auto& [id, m] : inflight_out) total += m.message.footprint();
    for (const auto& m : queued) total += m.footprint();
    return total;
}

std::uint16_t SessionState::allocate_packet_id() {
    if (inflight_out.size() >= 65535) return 0;
    while (true) {
        std::uint16_t id = next_packet_id;
        next_packet_id = next_packet_id == 65535 ? 1 : static_cast<std::uint16_t>(next_packet_id + 1);
        if (!inflight_out.contains(id)) return id;
    }
}

BrokerCore::BrokerCore(SecurityPolicy policy, EventSink* events)
    : policy_(std::move(policy)), events_(events), auth_(policy_) {
    policy_.validate();
    if (policy_.ban_policy) bans_.emplace(*policy_.ban_policy);
}

const SessionState* BrokerCore::session(const std::string& client_id) const {
    auto it = sessions_.find(client_id);
    return it == sessions_.end() ? nullptr : &it->second;
}

std::vector<BrokerAction> BrokerCore::take_actions() {
    std::vector<BrokerAction> out;
    out.swap(actions_);
    return out;
}

void BrokerCore::send(ConnectionId id, const wire::ControlPacket& packet) {
    if (!connections_.contains(id)) return;
    actions_.push_back(SendBytes{id, wire::encode_packet(packet)});
}

void BrokerCore::event(std::string kind, const Connection* conn, std::string detail) {
    if (!events_) return;
    BrokerEvent e;
    e.kind = std::move(kind);
    if (conn) {
        e.client_id = conn->client_id;
        e.source = conn->source;
    }
    e.detail = std::move(detail);
    events_->emit(e);
}

void BrokerCore::open(ConnectionId id, std::string source, TimePoint now) {
    now_ = now;
    Connection c;
    c.source = std::move(source);
    c.last_activity = now;
    connections_.insert_or_assign(id, std::move(c));
}

void BrokerCore::receive(ConnectionId id, std::span<const std::uint8_t> data, TimePoint now) {
    now_ = now;
    auto it = connections_.find(id);
    if (it == connections_.end()) return;
    it->second.inbuf.insert(it->second.inbuf.end(), data.begin(), data.end());
    it->second.last_activity = now;

    std::size_t offset = 0;
    while (true) {
        auto cit = connections_.find(id);
        if (cit == connections_.end()) return;
        auto& conn = cit->second;
        std::span<const std::uint8_t> rest(conn.inbuf.data() + offset, conn.inbuf.size() - offset);
        try {
            auto header = wire::peek_frame(rest);
            if (!header) break;
            if (policy_.max_packet_size > 0 && header->total_size() > policy_.max_packet_size) {
                ++stats_.closed_oversize_packet;
                event("drop", &conn,
                      "packet of " + std::to_string(header->total_size()) +
                          " bytes exceeds max_packet_size; closing");
                close(id, now, true);
                return;
            }
            if (rest.size() < header->total_size()) break;
            auto decoded = wire::decode_packet(rest);
            offset += decoded->consumed;
            dispatch(id, conn, decoded->packet, now);
        } catch (const wire::MalformedPacket& e) {
            ++stats_.protocol_errors;
            event("protocol_error", &conn, std::string(wire::malformed_name(e.kind())) + ": " + e.what());
            if (e.kind() == wire::Malformed::UnsupportedProtocol && !conn.connected) {
                send(id, wire::Connack{false, static_cast<std::uint8_t>(wire::ConnackCode::UnacceptableProtocol)});
                ++stats_.connections_refused;
            }
            close(id, now, true);
            return;
        }
    }
    auto& buf = connections_.at(id).inbuf;
    buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(offset));
}

void BrokerCore::handle(ConnectionId id, const wire::ControlPacket& packet, TimePoint now) {
    now_ = now;
    auto it = connections_.find(id);
    if (it == connections_.end()) return;
    it->second.last_activity = now;
    dispatch(id, it->second, packet, now);
}

void BrokerCore::dispatch(ConnectionId id, Connection& conn, const wire::ControlPacket& packet,
                          TimePoint now) {
    auto violation = [&](const std::string& why) {
        ++stats_.protocol_errors;
        event("protocol_error", &conn, why);
        close(id, now, true);
    };

    if (!conn.connected) {
        if (const auto* c = std::get_if<wire::Connect>(&packet)) {
            handle_connect(id, *c, now);
        } else {
            violation("first packet was " + std::string(wire::packet_type_name(wire::type_of(packet))));
        }
        return;
    }

    auto& session = sessions_.at(conn.client_id);
    std::visit(
        Overloaded{
            [&](const wire::Connect&) { violation("second CONNECT on one connection"); },
            [&](const wire::Publish& p) { handle_publish(id, p); },
            [&](const wire::Puback& a) {
                auto f = session.inflight_out.find(a.packet_id);
                if (f != session.inflight_out.end() && f->second.stage == OutboundStage::AwaitPuback)
                    session.inflight_out.erase(f);
            },
            [&](const wire::Pubrec& a) {
                auto f = session.inflight_out.find(a.packet_id);
                if (f != session.inflight_out.end() && f->second.stage == OutboundStage::AwaitPubrec)
                    f->second.stage = OutboundStage::AwaitPubcomp;
                send(id, wire::Pubrel{a.packet_id});
            },
            [&](const wire::Pubrel& a) {
                session.inbound_qos2.erase(a.packet_id);
                send(id, wire::Pubcomp{a.packet_id});
            },
            [&](const wire::Pubcomp& a) {
                auto f = session.inflight_out.find(a.packet_id);
                if (f != session.inflight_out.end() && f->second.stage == OutboundStage::AwaitPubcomp)
                    session.inflight_out.erase(f);
            },
            [&](const wire::Subscribe& s) { handle_subscribe(id, s); },
            [&](const wire::Unsubscribe& u) {
                for (const auto& f : u.filters) {
                    if (session.subscriptions.erase(f) > 0) subscriptions_.erase(f, session.client_id);
                }
                send(id, wire::Unsuback{u.packet_id});
            },
            [&](const wire::Pingreq&) { send(id, wire::Pingresp{}); },
            [&](const wire::Disconnect&) { handle_disconnect(id, true, now); },
            [&](const auto& other) {
                violation("client sent " + std::string(wire::packet_type_name(wire::type_of(other))));
            },
        },
        packet);
}

BanDecision BrokerCore::record_auth_failure(const std::string& source, TimePoint now) {
    if (!bans_) return {};
    auto decision = bans_->record_failure(source, now);
    if (decision.banned) {
        ++stats_.bans;
        if (events_) events_->emit({"ban", "", source,
                                    std::to_string(decision.failures_in_window) + " failures in window"});
    }
    return decision;
}

ConnectOutcome BrokerCore::handle_connect(ConnectionId id, const wire::Connect& packet, TimePoint now) {
    now_ = now;
    ConnectOutcome out;
    auto cit = connections_.find(id);
    if (cit == connections_.end()) return out;
    auto& conn = cit->second;

    auto refuse = [&](wire::ConnackCode code) {
        out.connack = wire::Connack{false, static_cast<std::uint8_t>(code)};
        send(id, out.connack);
        ++stats_.connections_refused;
        close(id, now, false);
        return out;
    };

    if (bans_ && bans_->is_banned(conn.source, now)) {
        ++stats_.banned_refusals;
        event("banned_refusal", &conn, "source is banned");
        return refuse(wire::ConnackCode::NotAuthorized);
    }

    auto result = auth_.check(packet.credentials);
    if (result != AuthResult::Accepted) {
        ++stats_.auth_failures;
        event("auth_failure", &conn,
              packet.credentials ? "user " + packet.credentials->username : std::string("anonymous"));
        record_auth_failure(conn.source, now);
        return refuse(result == AuthResult::BadCredentials ? wire::ConnackCode::BadCredentials
                                                           : wire::ConnackCode::NotAuthorized);
    }

    if (packet.will && !wire::is_valid_topic_name(packet.will->topic)) {
        ++stats_.protocol_errors;
        event("protocol_error", &conn, "invalid will topic");
        close(id, now, false);
        return out;
    }

    std::string client_id = packet.client_id;
    if (client_id.empty()) {
        if (!packet.clean_session) return refuse(wire::ConnackCode::IdentifierRejected);
        client_id = "auto-" + std::to_string(++auto_id_counter_);
    }

    // Session take-over: the newer connection wins.
    if (auto sit = sessions_.find(client_id); sit != sessions_.end() && sit->second.connection) {
        auto old = *sit->second.connection;
        sit->second.will.reset();
        if (auto oc = connections_.find(old); oc != connections_.end()) {
            event("disconnect", &oc->second, "taken over by a new connection");
            oc->second.connected = false;
            connections_.erase(oc);
            actions_.push_back(CloseConnection{old});
        }
        sit->second.connected = false;
        sit->second.connection.reset();
    }

    bool session_present = false;
    auto sit = sessions_.find(client_id);
    if (sit != sessions_.end() && (packet.clean_session || sit->second.clean_session)) {
        for (const auto& [filter, qos] : sit->second.subscriptions) subscriptions_.erase(filter, client_id);
        sessions_.erase(sit);
        sit = sessions_.end();
    }
    if (sit == sessions_.end()) {
        sit = sessions_.emplace(client_id, SessionState{}).first;
        sit->second.client_id = client_id;
    } else {
        session_present = true;
    }

    auto& session = sit->second;
    session.clean_session = packet.clean_session;
    session.principal = packet.credentials ? Principal(packet.credentials->username) : std::nullopt;
    session.will = packet.will;
    session.connected = true;
    session.connection = id;

    conn.connected = true;
    conn.client_id = client_id;
    conn.keep_alive = packet.keep_alive;
    conn.last_activity = now;

    ++stats_.connections_accepted;
    event("connect", &conn, "principal " + principal_label(session.principal));

    out.accepted = true;
    out.connack = wire::Connack{session_present, 0};
    send(id, out.connack);
    if (session_present) resume(session);
    return out;
}

void BrokerCore::handle_subscribe(ConnectionId id, const wire::Subscribe& packet) {
    auto cit = connections_.find(id);
    if (cit == connections_.end() || !cit->second.connected) return;
    auto& conn = cit->second;
    if (packet.filters.empty()) {
        ++stats_.protocol_errors;
        event("protocol_error", &conn, "SUBSCRIBE with no filters");
        close(id, now_, true);
        return;
    }
    auto& session = sessions_.at(conn.client_id);

    wire::Suback ack;
    ack.packet_id = packet.packet_id;
    std::vector<std::pair<std::string, std::uint8_t>> granted;
    for (const auto& sub : packet.filters) {
        if (!wire::is_valid_topic_filter(sub.filter) || sub.qos > 2) {
            ack.return_codes.push_back(wire::kSubackFailure);
            continue;
        }
        if (!authorize(policy_, session.principal, Action::Subscribe, sub.filter)) {
            ack.return_codes.push_back(wire::kSubackFailure);
            event("drop", &conn, "subscribe denied on " + sub.filter);
            continue;
        }
        session.subscriptions[sub.filter] = sub.qos;
        subscriptions_.insert(sub.filter, session.client_id, sub.qos);
        ack.return_codes.push_back(sub.qos);
        granted.emplace_back(sub.filter, sub.qos);
    }
    send(id, ack);

    std::string client_id = session.client_id;
    for (const auto& [filter, qos] : granted) {
        for (const auto& [topic, msg] : retained_) {
            if (!wire::topic_matches(filter, topic)) continue;
            auto sit = sessions_.find(client_id);
            if (sit == sessions_.end() || !sit->second.connected) return;
            Message m{topic, msg.payload, msg.qos, true};
            deliver(sit->second, m, std::min(msg.qos, qos), true);
        }
    }
}

void BrokerCore::handle_publish(ConnectionId id, const wire::Publish& packet) {
    auto cit = connections_.find(id);
    if (cit == connections_.end() || !cit->second.connected) return;
    auto& conn = cit->second;
    auto& session = sessions_.at(conn.client_id);
    ++stats_.publishes_received;

    if (!wire::is_valid_topic_name(packet.topic) || (packet.qos > 0) != packet.packet_id.has_value()) {
        ++stats_.protocol_errors;
        event("protocol_error", &conn, "invalid PUBLISH");
        close(id, now_, true);
        return;
    }

    auto acknowledge = [&, pid = packet.packet_id, qos = packet.qos] {
        if (qos == 1) send(id, wire::Puback{*pid});
        if (qos == 2) send(id, wire::Pubrec{*pid});
    };

    if (policy_.message_size_limit > 0 && packet.payload.size() > policy_.message_size_limit) {
        ++stats_.dropped_oversize_message;
        event("drop", &conn, "message of " + describe(packet.payload) + " exceeds message_size_limit");
        if (packet.qos == 2) session.inbound_qos2.insert(*packet.packet_id);
        acknowledge();
        return;
    }

    if (!authorize(policy_, session.principal, Action::Publish, packet.topic)) {
        ++session.denied_publishes;
        ++stats_.dropped_acl;
        event("drop", &conn, "publish denied on " + packet.topic);
        if (packet.qos == 2) session.inbound_qos2.insert(*packet.packet_id);
        acknowledge();
        return;
    }

    if (packet.qos == 2 && !session.inbound_qos2.insert(*packet.packet_id).second) {
        // retransmission before PUBREL: already routed
        acknowledge();
        return;
    }

    Message msg{packet.topic, packet.payload, packet.qos, packet.retain};
    if (packet.retain) {
        if (packet.payload.empty())
            retained_.erase(packet.topic);
        else
            retained_.insert_or_assign(packet.topic, RetainedMessage{packet.payload, packet.qos});
    }
    route(msg);
    acknowledge();
}

void BrokerCore::route(const Message& message) {
    std::map<std::string, std::uint8_t> targets;
    subscriptions_.match(message.topic, [&](const std::string& client_id, std::uint8_t qos) {
        auto [it, inserted] = targets.emplace(client_id, qos);
        if (!inserted) it->second = std::max(it->second, qos);
    });
    for (const auto& [client_id, granted] : targets) {
        auto sit = sessions_.find(client_id);
        if (sit == sessions_.end()) continue;
        deliver(sit->second, message, std::min(message.qos, granted), false);
    }
}

void BrokerCore::deliver(SessionState& session, const Message& message, std::uint8_t qos, bool retain_flag) {
    Message m = message;
    m.qos = qos;
    m.retain = retain_flag;
    const auto limit = policy_.max_inflight_bytes;
    const bool over = limit > 0 && session.held_bytes() + m.footprint() > limit;

    if (!session.connected) {
        if (session.clean_session || qos == 0) return;
        if (over) {
            ++session.shed_deliveries;
            ++stats_.dropped_inflight;
            event("drop", nullptr, "offline queue for " + session.client_id + " exceeds max_inflight_bytes");
            return;
        }
        session.queued.push_back(std::move(m));
        return;
    }

    const auto conn_id = *session.connection;
    if (qos == 0) {
        if (over) {
            ++session.shed_deliveries;
            ++stats_.dropped_inflight;
            return;
        }
        send(conn_id, wire::Publish{false, 0, retain_flag, m.topic, std::nullopt, m.payload});
        ++stats_.deliveries;
        return;
    }

    auto pid = over ? std::uint16_t{0} : session.allocate_packet_id();
    if (pid == 0) {
        ++stats_.dropped_inflight;
        auto cit = connections_.find(conn_id);
        event("drop", cit == connections_.end() ? nullptr : &cit->second,
              "qos>0 backlog exceeds max_inflight_bytes; closing");
        close(conn_id, now_, true);
        return;
    }
    auto [it, inserted] = session.inflight_out.emplace(
        pid, InflightMessage{std::move(m), qos == 1 ? OutboundStage::AwaitPuback : OutboundStage::AwaitPubrec});
    transmit(session, pid, it->second, false);
    ++stats_.deliveries;
}

void BrokerCore::transmit(SessionState& session, std::uint16_t packet_id, const InflightMessage& msg, bool dup) {
    if (!session.connection) return;
    if (msg.stage == OutboundStage::AwaitPubcomp) {
        send(*session.connection, wire::Pubrel{packet_id});
        return;
    }
    send(*session.connection, wire::Publish{dup, msg.message.qos, msg.message.retain, msg.message.topic,
                                            packet_id, msg.message.payload});
}

void BrokerCore::resume(SessionState& session) {
    for (const auto& [pid, msg] : session.inflight_out) transmit(session, pid, msg, true);
    const std::string client_id = session.client_id;
    while (true) {
        auto sit = sessions_.find(client_id);
        if (sit == sessions_.end() || !sit->second.connected || sit->second.queued.empty()) return;
        Message m = std::move(sit->second.queued.front());
        sit->second.queued.pop_front();
        auto qos = m.qos;
        auto retain = m.retain;
        deliver(sit->second, m, qos, retain);
    }
}

void BrokerCore::publish_will(SessionState& session) {
    if (!session.will) return;
    auto will = std::move(*session.will);
    session.will.reset();
    if (!authorize(policy_, session.principal, Action::Publish, will.topic)) {
        ++stats_.dropped_acl;
        return;
    }
    ++stats_.wills_published;
    Message msg{will.topic, will.payload, will.qos, will.retain};
    if (will.retain) {
        if (will.payload.empty())
            retained_.erase(will.topic);
        else
            retained_.insert_or_assign(will.topic, RetainedMessage{will.payload, will.qos});
    }
    route(msg);
}

void BrokerCore::close(ConnectionId id, TimePoint now, bool publish_will_message) {
    now_ = now;
    auto it = connections_.find(id);
    if (it == connections_.end()) return;
    Connection conn = std::move(it->second);
    connections_.erase(it);
    actions_.push_back(CloseConnection{id});
    if (!conn.connected) return;

    event("disconnect", &conn, publish_will_message ? "abrupt" : "graceful");
    auto sit = sessions_.find(conn.client_id);
    if (sit == sessions_.end() || sit->second.connection != id) return;
    sit->second.connected = false;
    sit->second.connection.reset();
    if (publish_will_message)
        publish_will(sit->second);
    else
        sit->second.will.reset();

    sit = sessions_.find(conn.client_id);
    if (sit != sessions_.end() && sit->second.clean_session && !sit->second.connected) {
        for (const auto& [filter, qos] : sit->second.subscriptions) subscriptions_.erase(filter, conn.client_id);
        sessions_.erase(sit);
    }
}

void BrokerCore::handle_disconnect(ConnectionId id, bool graceful, TimePoint now) { close(id, now, !graceful); }

void BrokerCore::connection_lost(ConnectionId id, TimePoint now) { close(id, now, true); }

void BrokerCore::tick(TimePoint now) {
    now_ = now;
    std::vector<ConnectionId> expired;
    for (const auto& [id, conn] : connections_) {
        auto idle = now - conn.last_activity;
        if (conn.connected && conn.keep_alive > 0) {
            if (idle > std::chrono::milliseconds(conn.keep_alive * 1500)) expired.push_back(id);
        } else if (!conn.connected && idle > kConnectTimeout) {
            expired.push_back(id);
        }
    }
    for (auto id : expired) {
        auto it = connections_.find(id);
        if (it == connections_.end()) continue;
        event("disconnect", &it->second, "keep-alive expired");
        close(id, now, true);
    }
}

}  // namespace mqttbed::broker
