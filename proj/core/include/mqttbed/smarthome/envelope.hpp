#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "mqttbed/wire/packet.hpp"

namespace mqttbed::smarthome {

inline constexpr std::size_t kTagSize = 32;
inline constexpr std::size_t kKeySize = 32;

using MacTag = std::array<std::uint8_t, kTagSize>;
using EnvelopeKey = std::array<std::uint8_t, kKeySize>;

/// HMAC-SHA256 with an arbitrary-length key.
MacTag hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message);

/// Application payload with an appended MAC over (u16be topic length, topic, payload).
struct SealedPayload {
    wire::Bytes payload;
    MacTag tag{};

    /// Wire layout: payload bytes followed by the 32-byte tag.
    wire::Bytes to_wire() const;
    /// nullopt when the input is shorter than a tag.
    static std::optional<SealedPayload> from_wire(std::span<const std::uint8_t> bytes);
};

SealedPayload seal(std::span<const std::uint8_t> payload, std::string_view topic, const EnvelopeKey& key);

/// Returns the payload when the tag verifies; comparison is constant time.
std::optional<wire::Bytes> verify(const SealedPayload& sealed, std::string_view topic, const EnvelopeKey& key);

/// Convenience over the wire layout.
std::optional<wire::Bytes> open_wire(std::span<const std::uint8_t> bytes, std::string_view topic,
                                     const EnvelopeKey& key);

/// Parses 64 hex characters.
EnvelopeKey key_from_hex(std::string_view hex);

}  // namespace mqttbed::smarthome
