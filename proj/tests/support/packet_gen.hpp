#pragma once

// Random well-formed control packets for round-trip properties and benchmarks.

#include <random>
#include <string>

#include "mqttbed/wire/packet.hpp"

namespace mqttbed::testing {

class PacketGenerator {
public:
    explicit PacketGenerator(std::uint64_t seed) : rng_(seed) {}

    std::string topic_name() {
        static constexpr std::string_view kLevels[] = {"home", "a", "sensor", "temp", "", "x-y", "\xc3\xa9t\xc3\xa9"};
        int levels = uniform(1, 4);
        std::string s;
        for (int i = 0; i < levels; ++i) {
            if (i) s += '/';
            s += kLevels[uniform(0, std::size(kLevels) - 1)];
        }
        if (s.empty()) s = "t";
        return s;
    }

    std::string topic_filter() {
        int levels = uniform(1, 4);
        std::string s;
        for (int i = 0; i < levels; ++i) {
            if (i) s += '/';
            int pick = uniform(0, 9);
            if (pick == 0) s += '+';
            else if (pick == 1 && i == levels - 1) s += '#';
            else s += "lvl" + std::to_string(pick);
        }
        return s;
    }

    std::string text(std::size_t max_len) {
        std::string s(uniform(0, max_len), 'a');
        for (auto& c : s) c = static_cast<char>(uniform(0x21, 0x7e));
        return s;
    }

    wire::Bytes bytes(std::size_t max_len) {
        wire::Bytes b(uniform(0, max_len));
        for (auto& c : b) c = static_cast<std::uint8_t>(uniform(0, 255));
        return b;
    }

    std::uint16_t packet_id() { return static_cast<std::uint16_t>(uniform(1, 65535)); }
    std::uint8_t qos() { return static_cast<std::uint8_t>(uniform(0, 2)); }
    bool flip() { return uniform(0, 1) == 1; }

    wire::ControlPacket packet() {
        using namespace wire;
        switch (uniform(1, 14)) {
            case 1: {
                Connect c;
                c.client_id = text(23);
                c.clean_session = c.client_id.empty() ? true : flip();
                c.keep_alive = static_cast<std::uint16_t>(uniform(0, 65535));
                if (flip()) c.will = WillMessage{topic_name(), bytes(64), qos(), flip()};
                if (flip()) {
                    Credentials cr{text(16), std::nullopt};
                    if (flip()) cr.password = bytes(32);
                    c.credentials = cr;
                }
                return c;
            }
            case 2: {
                auto code = static_cast<std::uint8_t>(uniform(0, 5));
                return Connack{code == 0 && flip(), code};
            }
            case 3: {
                Publish p;
                p.qos = qos();
                p.dup = p.qos > 0 && flip();
                p.retain = flip();
                p.topic = topic_name();
                if (p.qos > 0) p.packet_id = packet_id();
                p.payload = bytes(uniform(0, 3) == 0 ? 2000 : 64);
                return p;
            }
            case 4: return Puback{packet_id()};
            case 5: return Pubrec{packet_id()};
            case 6: return Pubrel{packet_id()};
            case 7: return Pubcomp{packet_id()};
            case 8: {
                Subscribe s{packet_id(), {}};
                for (int i = uniform(1, 4); i > 0; --i) s.filters.push_back({topic_filter(), qos()});
                return s;
            }
            case 9: {
                Suback s{packet_id(), {}};
                static constexpr std::uint8_t kCodes[] = {0, 1, 2, kSubackFailure};
                for (int i = uniform(1, 4); i > 0; --i) s.return_codes.push_back(kCodes[uniform(0, 3)]);
                return s;
            }
            case 10: {
                Unsubscribe u{packet_id(), {}};
                for (int i = uniform(1, 4); i > 0; --i) u.filters.push_back(topic_filter());
                return u;
            }
            case 11: return Unsuback{packet_id()};
            case 12: return Pingreq{};
            case 13: return Pingresp{};
            default: return Disconnect{};
        }
    }

private:
    int uniform(std::size_t lo, std::size_t hi) {
        return static_cast<int>(std::uniform_int_distribution<std::size_t>(lo, hi)(rng_));
    }

    std::mt19937_64 rng_;
};

}  // namespace mqttbed::testing
