#pragma once

// MQTT 3.1.1 control packets as plain value types.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mqttbed::wire {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

enum class PacketType : std::uint8_t {
    Connect = 1,
    Connack = 2,
    Publish = 3,
    Puback = 4,
    Pubrec = 5,
    Pubrel = 6,
    Pubcomp = 7,
    Subscribe = 8,
    Suback = 9,
    Unsubscribe = 10,
    Unsuback = 11,
    Pingreq = 12,
    Pingresp = 13,
    Disconnect = 14,
};

std::string_view packet_type_name(PacketType t);

enum class ConnackCode : std::uint8_t {
    Accepted = 0,
    UnacceptableProtocol = 1,
    IdentifierRejected = 2,
    ServerUnavailable = 3,
    BadCredentials = 4,
    NotAuthorized = 5,
};

inline constexpr std::uint8_t kSubackFailure = 0x80;

struct WillMessage {
    std::string topic;
    Bytes payload;
    std::uint8_t qos = 0;
    bool retain = false;

    bool operator==(const WillMessage&) const = default;
};

struct Credentials {
    std::string username;
    std::optional<Bytes> password;

    bool operator==(const Credentials&) const = default;
};

struct Connect {
    std::string client_id;
    bool clean_session = true;
    std::uint16_t keep_alive = 0;
    std::optional<WillMessage> will;
    std::optional<Credentials> credentials;

    bool operator==(const Connect&) const = default;
};

struct Connack {
    bool session_present = false;
    std::uint8_t return_code = 0;

    bool operator==(const Connack&) const = default;
};

struct Publish {
    bool dup = false;
    std::uint8_t qos = 0;
    bool retain = false;
    std::string topic;
    std::optional<std::uint16_t> packet_id;
    Bytes payload;

    bool operator==(const Publish&) const = default;
};

struct Puback {
    std::uint16_t packet_id = 0;
    bool operator==(const Puback&) const = default;
};
struct Pubrec {
    std::uint16_t packet_id = 0;
    bool operator==(const Pubrec&) const = default;
};
struct Pubrel {
    std::uint16_t packet_id = 0;
    bool operator==(const Pubrel&) const = default;
};
struct Pubcomp {
    std::uint16_t packet_id = 0;
    bool operator==(const Pubcomp&) const = default;
};

struct Subscription {
    std::string filter;
    std::uint8_t qos = 0;
    bool operator==(const Subscription&) const = default;
};

struct Subscribe {
    std::uint16_t packet_id = 0;
    std::vector<Subscription> filters;
    bool operator==(const Subscribe&) const = default;
};

struct Suback {
    std::uint16_t packet_id = 0;
    std::vector<std::uint8_t> return_codes;
    bool operator==(const Suback&) const = default;
};

struct Unsubscribe {
    std::uint16_t packet_id = 0;
    std::vector<std::string> filters;
    bool operator==(const Unsubscribe&) const = default;
};

struct Unsuback {
    std::uint16_t packet_id = 0;
    bool operator==(const Unsuback&) const = default;
};

struct Pingreq {
    bool operator==(const Pingreq&) const = default;
};
struct Pingresp {
    bool operator==(const Pingresp&) const = default;
};
struct Disconnect {
    bool operator==(const Disconnect&) const = default;
};

using ControlPacket = std::variant<Connect, Connack, Publish, Puback, Pubrec, Pubrel, Pubcomp,
                                   Subscribe, Suback, Unsubscribe, Unsuback, Pingreq, Pingresp,
                                   Disconnect>;

PacketType type_of(const ControlPacket& p);

}  // namespace mqttbed::wire
