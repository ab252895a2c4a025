#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "mqttbed/wire/packet.hpp"

namespace mqttbed::wire {

inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Malformed {
    UnknownType,
    ReservedFlags,
    InvalidQos,
    LengthMismatch,
    MalformedVarint,
    InvalidUtf8,
    InvalidTopic,
    ProtocolViolation,
    UnsupportedProtocol,
};

std::string_view malformed_name(Malformed kind);

class MalformedPacket : public std::runtime_error {
public:
    MalformedPacket(Malformed kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Malformed kind() const noexcept { return kind_; }

private:
    Malformed kind_;
};

/// Base-128 varint used for the fixed header's Remaining Length field.
Bytes encode_remaining_length(std::uint32_t n);
void append_remaining_length(Bytes& out, std::uint32_t n);

struct RemainingLength {
    std::uint32_t value = 0;
    std::size_t consumed = 0;
};

/// Returns nullopt when the input ends on a continuation byte.
/// Throws MalformedPacket(MalformedVarint) when a fifth byte would be needed.
std::optional<RemainingLength> decode_remaining_length(std::span<const std::uint8_t> bytes);

Bytes encode_packet(const ControlPacket& p);

struct DecodedPacket {
    ControlPacket packet;
    std::size_t consumed = 0;
};

/// Incremental decoder over a stream prefix. nullopt means the prefix does not
/// yet hold a complete packet; the caller should read more and retry.
std::optional<DecodedPacket> decode_packet(std::span<const std::uint8_t> bytes);

struct FrameHeader {
    std::uint8_t first_byte = 0;
    std::uint32_t remaining_length = 0;
    std::size_t header_size = 0;

    std::size_t total_size() const { return header_size + remaining_length; }
};

/// Parses just the fixed header; lets callers enforce size limits before the
/// body has arrived.
std::optional<FrameHeader> peek_frame(std::span<const std::uint8_t> bytes);

/// Well-formed UTF-8 per MQTT rules: no surrogates, no U+0000.
bool is_valid_utf8(std::string_view s);

}  // namespace mqttbed::wire
