#include "mqttbed/wire/codec.hpp"

#include <string_view>
#include <type_traits>

#include "mqttbed/wire/topic.hpp"

namespace mqttbed::wire {

std::string_view packet_type_name(PacketType t) {
    switch (t) {
        case PacketType::Connect: return "CONNECT";
        case PacketType::Connack: return "CONNACK";
        case PacketType::Publish: return "PUBLISH";
        case PacketType::Puback: return "PUBACK";
        case PacketType::Pubrec: return "PUBREC";
        case PacketType::Pubrel: return "PUBREL";
        case PacketType::Pubcomp: return "PUBCOMP";
        case PacketType::Subscribe: return "SUBSCRIBE";
        case PacketType::Suback: return "SUBACK";
        case PacketType::Unsubscribe: return "UNSUBSCRIBE";
        case PacketType::Unsuback: return "UNSUBACK";
        case PacketType::Pingreq: return "PINGREQ";
        case PacketType::Pingresp: return "PINGRESP";
        case PacketType::Disconnect: return "DISCONNECT";
    }
    return "UNKNOWN";
}

PacketType type_of(const ControlPacket& p) {
    return static_cast<PacketType>(p.index() + 1);
}

std::string_view malformed_name(Malformed kind) {
    switch (kind) {
        case Malformed::UnknownType: return "unknown_type";
        case Malformed::ReservedFlags: return "reserved_flags";
        case Malformed::InvalidQos: return "invalid_qos";
        case Malformed::LengthMismatch: return "length_mismatch";
        case Malformed::MalformedVarint: return "malformed_varint";
        case Malformed::InvalidUtf8: return "invalid_utf8";
        case Malformed::InvalidTopic: return "invalid_topic";
        case Malformed::ProtocolViolation: return "protocol_violation";
        case Malformed::UnsupportedProtocol: return "unsupported_protocol";
    }
    return "unknown";
}

bool is_valid_utf8(std::string_view s) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    const auto* end = p + s.size();
    while (p < end) {
        unsigned char c = *p;
        if (c == 0) return false;
        if (c < 0x80) {
            ++p;
            continue;
        }
        std::size_t extra;
        std::uint32_t cp;
        if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (static_cast<std::size_t>(end - p) <= extra) return false;
        for (std::size_t i = 1; i <= extra; ++i) {
            if ((p[i] & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (p[i] & 0x3F);
        }
        // overlong forms
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000))
            return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        p += extra + 1;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Remaining Length

void append_remaining_length(Bytes& out, std::uint32_t n) {
    if (n > kMaxRemainingLength)
        throw EncodeError("remaining length " + std::to_string(n) + " exceeds 268435455");
    do {
        std::uint8_t byte = n % 128;
        n /= 128;
        if (n > 0) byte |= 0x80;
        out.push_back(byte);
    } while (n > 0);
}

Bytes encode_remaining_length(std::uint32_t n) {
    Bytes out;
    append_remaining_length(out, n);
    return out;
}

std::optional<RemainingLength> decode_remaining_length(std::span<const std::uint8_t> bytes) {
    std::uint32_t value = 0;
    std::uint32_t multiplier = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        if (i >= bytes.size()) return std::nullopt;
        std::uint8_t b = bytes[i];
        value += (b & 0x7F) * multiplier;
        if ((b & 0x80) == 0) return RemainingLength{value, i + 1};
        multiplier *= 128;
    }
    throw MalformedPacket(Malformed::MalformedVarint, "remaining length longer than 4 bytes");
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_binary(Bytes& out, std::span<const std::uint8_t> data, std::string_view field) {
    if (data.size() > 0xFFFF) throw EncodeError(std::string(field) + " longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(data.size()));
    out.insert(out.end(), data.begin(), data.end());
}

void put_string(Bytes& out, std::string_view s, std::string_view field) {
    if (!is_valid_utf8(s)) throw EncodeError(std::string(field) + " is not well-formed UTF-8");
    put_binary(out, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), field);
}

void check_qos(std::uint8_t qos, std::string_view what) {
    if (qos > 2) throw EncodeError(std::string(what) + " qos must be 0, 1 or 2");
}

void check_packet_id(std::uint16_t id, std::string_view what) {
    if (id == 0) throw EncodeError(std::string(what) + " packet id must be in 1..65535");
}

void check_publish_topic(std::string_view topic, std::string_view what) {
    if (topic.find_first_of("+#") != std::string_view::npos)
        throw EncodeError(std::string(what) + " topic name must not contain wildcards");
}

Bytes frame(std::uint8_t first_byte, const Bytes& body) {
    Bytes out;
    out.reserve(body.size() + 5);
    out.push_back(first_byte);
    if (body.size() > kMaxRemainingLength) throw EncodeError("packet body exceeds 268435455 bytes");
    append_remaining_length(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

Bytes encode_body(const Connect& c) {
    Bytes body;
    put_string(body, "MQTT", "protocol name");
    body.push_back(4);
    std::uint8_t flags = 0;
    if (c.clean_session) flags |= 0x02;
    if (c.will) {
        check_qos(c.will->qos, "will");
        check_publish_topic(c.will->topic, "will");
        flags |= 0x04;
        flags |= static_cast<std::uint8_t>(c.will->qos << 3);
        if (c.will->retain) flags |= 0x20;
    }
    if (c.credentials) {
        flags |= 0x80;
        if (c.credentials->password) flags |= 0x40;
    }
    body.push_back(flags);
    put_u16(body, c.keep_alive);
    put_string(body, c.client_id, "client id");
    if (c.will) {
        put_string(body, c.will->topic, "will topic");
        put_binary(body, c.will->payload, "will payload");
    }
    if (c.credentials) {
        put_string(body, c.credentials->username, "username");
        if (c.credentials->password) put_binary(body, *c.credentials->password, "password");
    }
    return body;
}

}  // namespace

Bytes encode_packet(const ControlPacket& packet) {
    return std::visit(
        [](const auto& p) -> Bytes {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Connect>) {
                return frame(0x10, encode_body(p));
            } else if constexpr (std::is_same_v<T, Connack>) {
                if (p.return_code > 5) throw EncodeError("CONNACK return code must be in 0..5");
                if (p.session_present && p.return_code != 0)
                    throw EncodeError("CONNACK session_present requires return code 0");
                return frame(0x20, Bytes{static_cast<std::uint8_t>(p.session_present ? 1 : 0),
                                         p.return_code});
            } else if constexpr (std::is_same_v<T, Publish>) {
                check_qos(p.qos, "PUBLISH");
                check_publish_topic(p.topic, "PUBLISH");
                if (p.qos == 0 && p.packet_id)
                    throw EncodeError("PUBLISH qos 0 must not carry a packet id");
                if (p.qos > 0 && !p.packet_id)
                    throw EncodeError("PUBLISH qos > 0 requires a packet id");
                if (p.qos == 0 && p.dup) throw EncodeError("PUBLISH qos 0 must not set dup");
                Bytes body;
                put_string(body, p.topic, "topic");
                if (p.packet_id) {
                    check_packet_id(*p.packet_id, "PUBLISH");
                    put_u16(body, *p.packet_id);
                }
                body.insert(body.end(), p.payload.begin(), p.payload.end());
                std::uint8_t first = 0x30 | static_cast<std::uint8_t>(p.qos << 1);
                if (p.dup) first |= 0x08;
                if (p.retain) first |= 0x01;
                return frame(first, body);
            } else if constexpr (std::is_same_v<T, Puback> || std::is_same_v<T, Pubrec> ||
                                 std::is_same_v<T, Pubrel> || std::is_same_v<T, Pubcomp> ||
                                 std::is_same_v<T, Unsuback>) {
                check_packet_id(p.packet_id, "acknowledgement");
                std::uint8_t first = 0;
                if constexpr (std::is_same_v<T, Puback>) first = 0x40;
                if constexpr (std::is_same_v<T, Pubrec>) first = 0x50;
                if constexpr (std::is_same_v<T, Pubrel>) first = 0x62;
                if constexpr (std::is_same_v<T, Pubcomp>) first = 0x70;
                if constexpr (std::is_same_v<T, Unsuback>) first = 0xB0;
                Bytes body;
                put_u16(body, p.packet_id);
                return frame(first, body);
            } else if constexpr (std::is_same_v<T, Subscribe>) {
                check_packet_id(p.packet_id, "SUBSCRIBE");
                if (p.filters.empty()) throw EncodeError("SUBSCRIBE requires at least one filter");
                Bytes body;
                put_u16(body, p.packet_id);
                for (const auto& s : p.filters) {
                    check_qos(s.qos, "SUBSCRIBE");
                    put_string(body, s.filter, "topic filter");
                    body.push_back(s.qos);
                }
                return frame(0x82, body);
            } else if constexpr (std::is_same_v<T, Suback>) {
                check_packet_id(p.packet_id, "SUBACK");
                Bytes body;
                put_u16(body, p.packet_id);
                for (auto rc : p.return_codes) {
                    if (rc > 2 && rc != kSubackFailure)
                        throw EncodeError("SUBACK return code must be 0, 1, 2 or 0x80");
                    body.push_back(rc);
                }
                return frame(0x90, body);
            } else if constexpr (std::is_same_v<T, Unsubscribe>) {
                check_packet_id(p.packet_id, "UNSUBSCRIBE");
                if (p.filters.empty()) throw EncodeError("UNSUBSCRIBE requires at least one filter");
                Bytes body;
                put_u16(body, p.packet_id);
                for (const auto& f : p.filters) put_string(body, f, "topic filter");
                return frame(0xA2, body);
            } else if constexpr (std::is_same_v<T, Pingreq>) {
                return Bytes{0xC0, 0x00};
            } else if constexpr (std::is_same_v<T, Pingresp>) {
                return Bytes{0xD0, 0x00};
            } else {
                static_assert(std::is_same_v<T, Disconnect>);
                return Bytes{0xE0, 0x00};
            }
        },
        packet);
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

    std::size_t remaining() const { return body_.size() - pos_; }
    bool at_end() const { return pos_ == body_.size(); }

    std::uint8_t u8() {
        need(1);
        return body_[pos_++];
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    Bytes binary() {
        auto len = u16();
        need(len);
        Bytes out(body_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  body_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
        pos_ += len;
        return out;
    }

    std::string utf8() {
        auto raw = binary();
        std::string s(raw.begin(), raw.end());
        if (!is_valid_utf8(s)) throw MalformedPacket(Malformed::InvalidUtf8, "string is not well-formed UTF-8");
        return s;
    }

    Bytes rest() {
        Bytes out(body_.begin() + static_cast<std::ptrdiff_t>(pos_), body_.end());
        pos_ = body_.size();
        return out;
    }

    void expect_end(std::string_view what) const {
        if (!at_end())
            throw MalformedPacket(Malformed::LengthMismatch,
                                  std::string(what) + " has trailing bytes beyond its layout");
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n)
            throw MalformedPacket(Malformed::LengthMismatch, "field extends past remaining length");
    }

    std::span<const std::uint8_t> body_;
    std::size_t pos_ = 0;
};

std::uint16_t read_packet_id(Reader& r) {
    auto id = r.u16();
    if (id == 0) throw MalformedPacket(Malformed::ProtocolViolation, "packet id 0 is not allowed");
    return id;
}

Connect decode_connect(Reader& r) {
    auto name = r.utf8();
    auto level = r.u8();
    if (name != "MQTT" || level != 4)
        throw MalformedPacket(Malformed::UnsupportedProtocol,
                              "unsupported protocol " + name + " level " + std::to_string(level));
    auto flags = r.u8();
    if (flags & 0x01) throw MalformedPacket(Malformed::ReservedFlags, "CONNECT reserved flag set");
    Connect c;
    c.clean_session = flags & 0x02;
    bool will_flag = flags & 0x04;
    std::uint8_t will_qos = (flags >> 3) & 0x03;
    bool will_retain = flags & 0x20;
    bool password_flag = flags & 0x40;
    bool username_flag = flags & 0x80;
    if (will_qos == 3) throw MalformedPacket(Malformed::InvalidQos, "CONNECT will qos 3");
    if (!will_flag && (will_qos != 0 || will_retain))
        throw MalformedPacket(Malformed::ProtocolViolation, "will qos/retain set without will flag");
    if (password_flag && !username_flag)
        throw MalformedPacket(Malformed::ProtocolViolation, "password flag without username flag");
    c.keep_alive = r.u16();
    c.client_id = r.utf8();
    if (will_flag) {
        WillMessage w;
        w.topic = r.utf8();
        if (w.topic.find_first_of("+#") != std::string::npos)
            throw MalformedPacket(Malformed::InvalidTopic, "will topic contains wildcards");
        w.payload = r.binary();
        w.qos = will_qos;
        w.retain = will_retain;
        c.will = std::move(w);
    }
    if (username_flag) {
        Credentials cred;
        cred.username = r.utf8();
        if (password_flag) cred.password = r.binary();
        c.credentials = std::move(cred);
    }
    r.expect_end("CONNECT");
    return c;
}

ControlPacket decode_body(std::uint8_t first, Reader& r) {
    auto type = first >> 4;
    auto flags = first & 0x0F;
    auto require_flags = [&](std::uint8_t expected, std::string_view what) {
        if (flags != expected)
            throw MalformedPacket(Malformed::ReservedFlags,
                                  std::string(what) + " has invalid fixed-header flags");
    };

    switch (type) {
        case 1: {
            require_flags(0, "CONNECT");
            return decode_connect(r);
        }
        case 2: {
            require_flags(0, "CONNACK");
            Connack c;
            auto ack_flags = r.u8();
            if (ack_flags & 0xFE) throw MalformedPacket(Malformed::ReservedFlags, "CONNACK reserved bits set");
            c.session_present = ack_flags & 0x01;
            c.return_code = r.u8();
            if (c.return_code > 5)
                throw MalformedPacket(Malformed::ProtocolViolation, "CONNACK return code out of range");
            r.expect_end("CONNACK");
            return c;
        }
        case 3: {
            Publish p;
            p.dup = flags & 0x08;
            p.qos = (flags >> 1) & 0x03;
            p.retain = flags & 0x01;
            if (p.qos == 3) throw MalformedPacket(Malformed::InvalidQos, "PUBLISH qos 3");
            if (p.qos == 0 && p.dup)
                throw MalformedPacket(Malformed::ReservedFlags, "PUBLISH qos 0 with dup set");
            p.topic = r.utf8();
            if (p.topic.find_first_of("+#") != std::string::npos)
                throw MalformedPacket(Malformed::InvalidTopic, "PUBLISH topic contains wildcards");
            if (p.qos > 0) p.packet_id = read_packet_id(r);
            p.payload = r.rest();
            return p;
        }
        case 4:
        case 5:
        case 6:
        case 7:
        case 11: {
            require_flags(type == 6 ? 0x02 : 0x00, packet_type_name(static_cast<PacketType>(type)));
            auto id = read_packet_id(r);
            r.expect_end(packet_type_name(static_cast<PacketType>(type)));
            switch (type) {
                case 4: return Puback{id};
                case 5: return Pubrec{id};
                case 6: return Pubrel{id};
                case 7: return Pubcomp{id};
                default: return Unsuback{id};
            }
        }
        case 8: {
            require_flags(0x02, "SUBSCRIBE");
            Subscribe s;
            s.packet_id = read_packet_id(r);
            while (!r.at_end()) {
                Subscription sub;
                sub.filter = r.utf8();
                auto opts = r.u8();
                if (opts & 0xFC) throw MalformedPacket(Malformed::ReservedFlags, "SUBSCRIBE options reserved bits set");
                sub.qos = opts & 0x03;
                if (sub.qos == 3) throw MalformedPacket(Malformed::InvalidQos, "SUBSCRIBE requested qos 3");
                s.filters.push_back(std::move(sub));
            }
            if (s.filters.empty())
                throw MalformedPacket(Malformed::ProtocolViolation, "SUBSCRIBE with no filters");
            return s;
        }
        case 9: {
            require_flags(0, "SUBACK");
            Suback s;
            s.packet_id = read_packet_id(r);
            while (!r.at_end()) {
                auto rc = r.u8();
                if (rc > 2 && rc != kSubackFailure)
                    throw MalformedPacket(Malformed::ProtocolViolation, "SUBACK return code invalid");
                s.return_codes.push_back(rc);
            }
            return s;
        }
        case 10: {
            require_flags(0x02, "UNSUBSCRIBE");
            Unsubscribe u;
            u.packet_id = read_packet_id(r);
            while (!r.at_end()) u.filters.push_back(r.utf8());
            if (u.filters.empty())
                throw MalformedPacket(Malformed::ProtocolViolation, "UNSUBSCRIBE with no filters");
            return u;
        }
        case 12:
            require_flags(0, "PINGREQ");
            r.expect_end("PINGREQ");
            return Pingreq{};
        case 13:
            require_flags(0, "PINGRESP");
            r.expect_end("PINGRESP");
            return Pingresp{};
        case 14:
            require_flags(0, "DISCONNECT");
            r.expect_end("DISCONNECT");
            return Disconnect{};
        default:
            throw MalformedPacket(Malformed::UnknownType, "unknown packet type " + std::to_string(type));
    }
}

}  // namespace

std::optional<FrameHeader> peek_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) return std::nullopt;
    auto type = bytes[0] >> 4;
    if (type == 0 || type == 15)
        throw MalformedPacket(Malformed::UnknownType, "unknown packet type " + std::to_string(type));
    auto len = decode_remaining_length(bytes.subspan(1));
    if (!len) return std::nullopt;
    return FrameHeader{bytes[0], len->value, 1 + len->consumed};
}

std::optional<DecodedPacket> decode_packet(std::span<const std::uint8_t> bytes) {
    auto header = peek_frame(bytes);
    if (!header) return std::nullopt;
    if (bytes.size() < header->total_size()) return std::nullopt;
    Reader r(bytes.subspan(header->header_size, header->remaining_length));
    auto packet = decode_body(header->first_byte, r);
    return DecodedPacket{std::move(packet), header->total_size()};
}

}  // namespace mqttbed::wire
