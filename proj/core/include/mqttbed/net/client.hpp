#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mqttbed/wire/packet.hpp"

namespace mqttbed::net {

using Clock = std::chrono::steady_clock;
using Millis = std::chrono::milliseconds;

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;

    std::string str() const { return host + ":" + std::to_string(port); }
    /// "host:port"; throws std::invalid_argument on bad input.
    static Endpoint parse(const std::string& s);
};

/// Blocking TCP byte stream with poll-based timeouts.
class TcpStream {
public:
    TcpStream() = default;
    ~TcpStream();
    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    /// `bind_host` optionally selects the local source address (e.g. 127.0.0.2).
    static TcpStream connect(const Endpoint& ep, Millis timeout, const std::string& bind_host = "");
    static TcpStream adopt(int fd);

    void send_all(std::span<const std::uint8_t> data);
    /// Returns 0 on orderly EOF, nullopt on timeout.
    std::optional<std::size_t> recv_some(std::span<std::uint8_t> out, Millis timeout);
    void shutdown_write();
    void close();
    bool is_open() const { return fd_ >= 0; }
    int fd() const { return fd_; }

private:
    explicit TcpStream(int fd) : fd_(fd) {}
    int fd_ = -1;
};

struct ClientOptions {
    Endpoint broker;
    std::string client_id;
    bool clean_session = true;
    std::uint16_t keep_alive = 0;
    std::optional<wire::Credentials> credentials;
    std::optional<wire::WillMessage> will;
    std::string bind_host;
    Millis connect_timeout{5000};
    /// Automatically answer inbound PUBLISH with PUBACK/PUBREC and PUBREL with PUBCOMP.
    bool auto_ack = true;
    /// Suppress inbound qos 2 redeliveries whose PUBREL has not arrived yet.
    bool dedupe_qos2 = true;
};

/// Minimal synchronous MQTT 3.1.1 client. Not thread-safe: one thread drives
/// each instance.
class MqttClient {
public:
    explicit MqttClient(ClientOptions options);
    ~MqttClient();

    MqttClient(const MqttClient&) = delete;
    MqttClient& operator=(const MqttClient&) = delete;

    /// Opens TCP, sends CONNECT and waits for CONNACK. Returns the CONNACK even
    /// when it refuses; throws NetworkError on transport failure or timeout.
    wire::Connack connect();

    void send(const wire::ControlPacket& packet);
    void send_raw(std::span<const std::uint8_t> bytes);

    /// Returns the packet id used (0 for qos 0).
    std::uint16_t publish(const std::string& topic, const wire::Bytes& payload, std::uint8_t qos = 0,
                          bool retain = false);
    /// Publishes and waits for the qos handshake to complete.
    bool publish_confirmed(const std::string& topic, const wire::Bytes& payload, std::uint8_t qos,
                           bool retain, Millis timeout);

    /// Sends SUBSCRIBE and returns the SUBACK return codes.
    std::optional<wire::Suback> subscribe(const std::vector<wire::Subscription>& filters, Millis timeout);

    /// Next application message, or nullopt on timeout.
    std::optional<wire::Publish> next_message(Millis timeout);

    /// Next non-PUBLISH packet (acks, SUBACK, ...), or nullopt on timeout.
    std::optional<wire::ControlPacket> next_control(Millis timeout);

    /// Waits for a control packet satisfying `pred`; other control packets are dropped.
    std::optional<wire::ControlPacket> wait_for(const std::function<bool(const wire::ControlPacket&)>& pred,
                                                Millis timeout);

    void disconnect();  // graceful: DISCONNECT then close
    void abort();       // abrupt: close without DISCONNECT

    bool connected() const { return stream_.is_open() && !eof_; }
    std::uint16_t next_packet_id();
    const ClientOptions& options() const { return options_; }

private:
    /// Reads and processes one packet. Returns false on timeout.
    bool pump(Millis timeout);
    void handle_inbound(wire::ControlPacket packet);
    void maybe_ping();

    ClientOptions options_;
    TcpStream stream_;
    wire::Bytes inbuf_;
    std::deque<wire::Publish> messages_;
    std::deque<wire::ControlPacket> controls_;
    std::set<std::uint16_t> inbound_qos2_;
    std::uint16_t packet_id_ = 0;
    Clock::time_point last_send_{};
    bool eof_ = false;
};

}  // namespace mqttbed::net
