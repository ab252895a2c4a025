#include <gtest/gtest.h>

#include <map>

#include "loopback.hpp"
#include "mqttbed/wire/codec.hpp"

using namespace mqttbed;
using namespace std::chrono_literals;
using mqttbed::testing::LoopbackBroker;

namespace {
std::string payload_text(const wire::Publish& p) { return wire::to_string(p.payload); }
}  // namespace

TEST(Qos, AtLeastOnceAcrossAckLossAndReconnect) {
    LoopbackBroker b;
    constexpr int kMessages = 50;
    {
        auto opts = b.client("persistent", false);
        opts.auto_ack = false;  // acks "lost": nothing is acknowledged
        net::MqttClient sub(opts);
        ASSERT_EQ(sub.connect().return_code, 0);
        ASSERT_TRUE(sub.subscribe({{"home/#", 1}}, 2000ms));

        net::MqttClient pub(b.client("publisher"));
        ASSERT_EQ(pub.connect().return_code, 0);
        for (int i = 0; i < kMessages; ++i)
            ASSERT_TRUE(pub.publish_confirmed("home/seq", wire::to_bytes(std::to_string(i)), 1, false, 2000ms));

        int seen = 0;
        while (seen < 20 && sub.next_message(2000ms)) ++seen;
        EXPECT_EQ(seen, 20);
        sub.abort();
    }
    std::map<std::string, int> counts;
    int duplicates_flagged = 0;
    net::MqttClient again(b.client("persistent", false));
    auto ack = again.connect();
    ASSERT_EQ(ack.return_code, 0);
    EXPECT_TRUE(ack.session_present);
    while (auto m = again.next_message(1500ms)) {
        ++counts[payload_text(*m)];
        if (m->dup) ++duplicates_flagged;
    }
    for (int i = 0; i < kMessages; ++i) EXPECT_GE(counts[std::to_string(i)], 1) << i;
    // The 20 unacknowledged deliveries come back as duplicates.
    EXPECT_GE(duplicates_flagged, 1);
}

TEST(Qos, ExactlyOnceUnderDuplicatePublish) {
    LoopbackBroker b;
    auto sub_opts = b.client("exact");
    sub_opts.dedupe_qos2 = false;  // count what the broker actually sends
    net::MqttClient sub(sub_opts);
    ASSERT_EQ(sub.connect().return_code, 0);
    ASSERT_TRUE(sub.subscribe({{"t/#", 2}}, 2000ms));

    auto pub_opts = b.client("dup-publisher");
    pub_opts.auto_ack = false;
    net::MqttClient pub(pub_opts);
    ASSERT_EQ(pub.connect().return_code, 0);
    constexpr int kMessages = 20;
    for (std::uint16_t i = 1; i <= kMessages; ++i) {
        wire::Publish p{false, 2, false, "t/x", i, wire::to_bytes("m" + std::to_string(i))};
        pub.send(p);
        p.dup = true;
        pub.send(p);  // retransmission before PUBREL
        pub.send(p);
        ASSERT_TRUE(pub.wait_for([&](const wire::ControlPacket& c) {
            auto* r = std::get_if<wire::Pubrec>(&c);
            return r && r->packet_id == i;
        }, 2000ms));
        pub.send(wire::Pubrel{i});
        ASSERT_TRUE(pub.wait_for([&](const wire::ControlPacket& c) {
            auto* r = std::get_if<wire::Pubcomp>(&c);
            return r && r->packet_id == i;
        }, 2000ms));
    }
    std::map<std::string, int> counts;
    while (auto m = sub.next_message(1000ms)) ++counts[payload_text(*m)];
    ASSERT_EQ(counts.size(), static_cast<std::size_t>(kMessages));
    for (auto& [payload, n] : counts) EXPECT_EQ(n, 1) << payload;
}

TEST(Qos, RetainedMessageForNewSubscriber) {
    LoopbackBroker b;
    net::MqttClient pub(b.client("sensor"));
    ASSERT_EQ(pub.connect().return_code, 0);
    ASSERT_TRUE(pub.publish_confirmed("home/livingroom/temperature", wire::to_bytes(R"({"temperature": 23.4})"), 1,
                                      true, 2000ms));
    net::MqttClient late(b.client("late"));
    ASSERT_EQ(late.connect().return_code, 0);
    auto codes = late.subscribe({{"#", 0}}, 2000ms);
    ASSERT_TRUE(codes);
    EXPECT_EQ(codes->return_codes, (std::vector<std::uint8_t>{0}));
    auto m = late.next_message(2000ms);
    ASSERT_TRUE(m);
    EXPECT_TRUE(m->retain);
    EXPECT_EQ(payload_text(*m), R"({"temperature": 23.4})");
}

TEST(Qos, LastWillOnAbruptDisconnect) {
    LoopbackBroker b;
    net::MqttClient watcher(b.client("watcher"));
    ASSERT_EQ(watcher.connect().return_code, 0);
    ASSERT_TRUE(watcher.subscribe({{"home/edge/status", 0}}, 2000ms));

    auto opts = b.client("edge");
    opts.will = wire::WillMessage{"home/edge/status", wire::to_bytes("offline"), 0, false};
    {
        net::MqttClient graceful(opts);
        ASSERT_EQ(graceful.connect().return_code, 0);
        graceful.disconnect();
    }
    EXPECT_FALSE(watcher.next_message(500ms));
    {
        net::MqttClient abrupt(opts);
        ASSERT_EQ(abrupt.connect().return_code, 0);
        abrupt.abort();
    }
    auto m = watcher.next_message(2000ms);
    ASSERT_TRUE(m);
    EXPECT_EQ(payload_text(*m), "offline");
}

TEST(Qos, KeepAliveExpiryFiresWill) {
    LoopbackBroker b;
    net::MqttClient watcher(b.client("watcher"));
    ASSERT_EQ(watcher.connect().return_code, 0);
    ASSERT_TRUE(watcher.subscribe({{"home/edge/status", 0}}, 2000ms));
    // A raw socket that sends CONNECT with keep-alive 1 s and then goes silent.
    auto stream = net::TcpStream::connect(b.endpoint(), 2000ms);
    wire::Connect c;
    c.client_id = "silent";
    c.keep_alive = 1;
    c.will = wire::WillMessage{"home/edge/status", wire::to_bytes("gone"), 0, false};
    stream.send_all(wire::encode_packet(c));
    auto start = std::chrono::steady_clock::now();
    auto m = watcher.next_message(5000ms);
    ASSERT_TRUE(m);
    EXPECT_EQ(payload_text(*m), "gone");
    EXPECT_GE(std::chrono::steady_clock::now() - start, 1400ms);
}
