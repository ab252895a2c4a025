#include "mqttbed/smarthome/envelope.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <stdexcept>

namespace mqttbed::smarthome {

namespace {

wire::Bytes mac_input(std::span<const std::uint8_t> payload, std::string_view topic) {
    wire::Bytes in;
    in.reserve(2 + topic.size() + payload.size());
    in.push_back(static_cast<std::uint8_t>((topic.size() >> 8) & 0xFF));
    in.push_back(static_cast<std::uint8_t>(topic.size() & 0xFF));
    in.insert(in.end(), topic.begin(), topic.end());
    in.insert(in.end(), payload.begin(), payload.end());
    return in;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

MacTag hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message) {
    MacTag tag{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
              tag.data(), &len) ||
        len != kTagSize)
        throw std::runtime_error("HMAC-SHA256 computation failed");
    return tag;
}

wire::Bytes SealedPayload::to_wire() const {
    wire::Bytes out(payload);
    out.insert(out.end(), tag.begin(), tag.end());
    return out;
}

std::optional<SealedPayload> SealedPayload::from_wire(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kTagSize) return std::nullopt;
    SealedPayload s;
    s.payload.assign(bytes.begin(), bytes.end() - kTagSize);
    std::copy(bytes.end() - kTagSize, bytes.end(), s.tag.begin());
    return s;
}

SealedPayload seal(std::span<const std::uint8_t> payload, std::string_view topic, const EnvelopeKey& key) {
    SealedPayload s;
    s.payload.assign(payload.begin(), payload.end());
    s.tag = hmac_sha256(key, mac_input(payload, topic));
    return s;
}

std::optional<wire::Bytes> verify(const SealedPayload& sealed, std::string_view topic, const EnvelopeKey& key) {
    auto expected = hmac_sha256(key, mac_input(sealed.payload, topic));
    if (CRYPTO_memcmp(expected.data(), sealed.tag.data(), kTagSize) != 0) return std::nullopt;
    return sealed.payload;
}

std::optional<wire::Bytes> open_wire(std::span<const std::uint8_t> bytes, std::string_view topic,
                                     const EnvelopeKey& key) {
    auto sealed = SealedPayload::from_wire(bytes);
    if (!sealed) return std::nullopt;
    return verify(*sealed, topic, key);
}

EnvelopeKey key_from_hex(std::string_view hex) {
    if (hex.size() != kKeySize * 2) throw std::invalid_argument("envelope key must be 64 hex characters");
    EnvelopeKey key{};
    for (std::size_t i = 0; i < kKeySize; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("envelope key contains a non-hex character");
        key[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return key;
}

}  // namespace mqttbed::smarthome
