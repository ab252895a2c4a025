#include <gtest/gtest.h>

#include "core_harness.hpp"
#include "mqttbed/broker/events.hpp"

using namespace mqttbed;
using namespace mqttbed::broker;
using mqttbed::testing::CoreHarness;
using namespace std::chrono_literals;

namespace {

wire::Connect anonymous(const std::string& id = "c") {
    wire::Connect c;
    c.client_id = id;
    return c;
}

wire::Connect with_login(const std::string& user, const std::string& pass, const std::string& id = "c") {
    auto c = anonymous(id);
    c.credentials = wire::Credentials{user, wire::to_bytes(pass)};
    return c;
}

wire::Publish pub(const std::string& topic, const std::string& payload, std::uint8_t qos = 0,
                  std::optional<std::uint16_t> pid = std::nullopt, bool retain = false) {
    wire::Publish p;
    p.topic = topic;
    p.payload = wire::to_bytes(payload);
    p.qos = qos;
    p.packet_id = qos ? std::optional<std::uint16_t>(pid.value_or(1)) : std::nullopt;
    p.retain = retain;
    return p;
}

}  // namespace

TEST(BrokerCore, ConnectReturnCodes) {
    CoreHarness open;
    EXPECT_EQ(open.connect(open.open(), anonymous()), 0);

    SecurityPolicy p;
    p.allow_anonymous = false;
    p.add_user("edge", "1234");
    CoreHarness closed(p);
    auto a = closed.open();
    EXPECT_EQ(closed.connect(a, anonymous()), 5);
    EXPECT_TRUE(closed.closed(a));
    EXPECT_EQ(closed.connect(closed.open(), with_login("edge", "1234")), 0);
    EXPECT_EQ(closed.connect(closed.open(), with_login("edge", "12345")), 4);
    EXPECT_EQ(closed.connect(closed.open(), with_login("nobody", "1234")), 4);
}

TEST(BrokerCore, EmptyClientIdRequiresCleanSession) {
    CoreHarness h;
    auto c = anonymous("");
    c.clean_session = false;
    EXPECT_EQ(h.connect(h.open(), c), 2);
    c.clean_session = true;
    EXPECT_EQ(h.connect(h.open(), c), 0);
}

TEST(BrokerCore, FirstPacketMustBeConnect) {
    CoreHarness h;
    auto id = h.open();
    h.send(id, wire::Pingreq{});
    EXPECT_TRUE(h.closed(id));
    EXPECT_EQ(h.core.stats().protocol_errors, 1u);
}

TEST(BrokerCore, OtherProtocolLevelsGetCode1) {
    const wire::Bytes v31{0x10, 15, 0, 6, 'M', 'Q', 'I', 's', 'd', 'p', 3, 0x02, 0, 0, 0, 1, 'a'};
    const wire::Bytes v5{0x10, 13, 0, 4, 'M', 'Q', 'T', 'T', 5, 0x02, 0, 0, 0, 1, 'a'};
    for (const auto& bytes : {v31, v5}) {
        CoreHarness h;
        auto id = h.open();
        h.send_raw(id, bytes);
        auto sent = h.take(id);
        ASSERT_EQ(sent.size(), 1u);
        auto* ack = std::get_if<wire::Connack>(&sent[0]);
        ASSERT_NE(ack, nullptr);
        EXPECT_EQ(ack->return_code, 1);
        EXPECT_TRUE(h.closed(id));
    }
}

TEST(BrokerCore, MalformedBytesCloseConnection) {
    CoreHarness h;
    auto id = h.connected("c");
    h.send_raw(id, {0x3E, 0x05, 0x00, 0x01, 'a', 0x00, 0x01});
    EXPECT_TRUE(h.closed(id));
}

TEST(BrokerCore, BannedSourceRefusedWithCode5) {
    SecurityPolicy p;
    p.add_user("edge", "1234");
    p.ban_policy = BanPolicy{5, 60s, 300s};
    CoreHarness h(p);
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(h.connect(h.open("10.0.0.9"), with_login("edge", "bad")), 4);
        h.now += 2s;
    }
    EXPECT_EQ(h.connect(h.open("10.0.0.9"), with_login("edge", "1234")), 5);
    EXPECT_EQ(h.connect(h.open("10.0.0.8"), with_login("edge", "1234")), 0);
    h.now += 301s;
    EXPECT_EQ(h.connect(h.open("10.0.0.9"), with_login("edge", "1234")), 0);
    EXPECT_EQ(h.core.stats().bans, 1u);
    EXPECT_EQ(h.core.stats().banned_refusals, 1u);
}

TEST(BrokerCore, SubackMixedValidity) {
    CoreHarness h;
    auto id = h.connected("c");
    auto codes = h.subscribe(id, {{"a/+", 1}, {"bad/#/x", 0}});
    EXPECT_EQ(codes, (std::vector<std::uint8_t>{0x01, 0x80}));
}

TEST(BrokerCore, EmptySubscribeClosesConnection) {
    CoreHarness h;
    auto id = h.connected("c");
    h.core.handle(id, wire::Subscribe{1, {}}, h.now);
    EXPECT_FALSE(h.core.is_open(id));
    EXPECT_EQ(h.core.stats().protocol_errors, 1u);
}

TEST(BrokerCore, AclDeniesAnonymousWildcard) {
    SecurityPolicy p;
    p.enforce_acl = true;
    CoreHarness h(p);
    auto id = h.connected("spy");
    EXPECT_EQ(h.subscribe(id, {{"#", 0}}), (std::vector<std::uint8_t>{0x80}));
}

TEST(BrokerCore, AclDropsUnauthorizedPublishButAcks) {
    SecurityPolicy p;
    p.enforce_acl = true;
    p.acl.push_back({std::nullopt, "#", false, true});
    CoreHarness h(p);
    auto sub = h.connected("sub");
    h.subscribe(sub, {{"#", 1}});
    auto pubber = h.connected("pub");
    h.send(pubber, pub("home/x", "v", 1, 4));
    auto acks = h.take(pubber);
    ASSERT_EQ(acks.size(), 1u);
    EXPECT_EQ(std::get<wire::Puback>(acks[0]).packet_id, 4);
    EXPECT_TRUE(h.publishes(sub).empty());
    EXPECT_EQ(h.core.stats().dropped_acl, 1u);
}

TEST(BrokerCore, Qos0FanOutOneCopyEach) {
    CoreHarness h;
    auto s1 = h.connected("s1");
    auto s2 = h.connected("s2");
    h.subscribe(s1, {{"home/+/temperature", 0}});
    h.subscribe(s2, {{"#", 0}, {"home/#", 0}});
    auto p = h.connected("p");
    h.send(p, pub("home/livingroom/temperature", R"({"temperature": 23.4})"));
    EXPECT_TRUE(h.take(p).empty());
    auto r1 = h.publishes(s1);
    auto r2 = h.publishes(s2);
    ASSERT_EQ(r1.size(), 1u);
    ASSERT_EQ(r2.size(), 1u);
    EXPECT_EQ(r1[0].qos, 0);
    EXPECT_FALSE(r1[0].packet_id.has_value());
}

TEST(BrokerCore, GrantedQosCapsDelivery) {
    CoreHarness h;
    auto s = h.connected("s");
    h.subscribe(s, {{"t", 1}});
    auto p = h.connected("p");
    h.send(p, pub("t", "x", 2, 9));
    auto got = h.publishes(s);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].qos, 1);
}

TEST(BrokerCore, Qos1OfflineQueueDeliveredAfterReconnect) {
    CoreHarness h;
    auto s = h.connected("sub", false);
    h.subscribe(s, {{"home/#", 1}});
    h.send(s, wire::Disconnect{});
    EXPECT_TRUE(h.closed(s));

    auto p = h.connected("pub");
    h.send(p, pub("home/a", "one", 1, 1));
    h.send(p, pub("home/b", "two", 1, 2));
    ASSERT_NE(h.core.session("sub"), nullptr);
    EXPECT_EQ(h.core.session("sub")->queued.size(), 2u);

    auto s2 = h.open();
    auto c = anonymous("sub");
    c.clean_session = false;
    EXPECT_EQ(h.connect(s2, c), 0);
    EXPECT_TRUE(h.last_session_present);
    auto got = h.publishes(s2);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(wire::to_string(got[0].payload), "one");
    EXPECT_EQ(wire::to_string(got[1].payload), "two");
}

TEST(BrokerCore, UnackedQos1ResentWithDupOnResume) {
    CoreHarness h;
    auto s = h.connected("sub", false);
    h.subscribe(s, {{"t", 1}});
    auto p = h.connected("pub");
    h.send(p, pub("t", "m", 1, 1));
    auto first = h.publishes(s);
    ASSERT_EQ(first.size(), 1u);
    EXPECT_FALSE(first[0].dup);
    h.lose(s);  // ack never sent

    auto s2 = h.open();
    auto c = anonymous("sub");
    c.clean_session = false;
    h.connect(s2, c);
    auto again = h.publishes(s2);
    ASSERT_EQ(again.size(), 1u);
    EXPECT_TRUE(again[0].dup);
    EXPECT_EQ(again[0].packet_id, first[0].packet_id);
    h.send(s2, wire::Puback{*again[0].packet_id});
    EXPECT_TRUE(h.core.session("sub")->inflight_out.empty());
}

TEST(BrokerCore, Qos2DuplicatePublishRoutedOnce) {
    CoreHarness h;
    auto s = h.connected("s");
    h.subscribe(s, {{"t", 2}});
    auto p = h.connected("p");
    h.send(p, pub("t", "once", 2, 5));
    auto dup = pub("t", "once", 2, 5);
    dup.dup = true;
    h.send(p, dup);
    auto acks = h.take(p);
    ASSERT_EQ(acks.size(), 2u);
    EXPECT_EQ(std::get<wire::Pubrec>(acks[0]).packet_id, 5);
    EXPECT_EQ(std::get<wire::Pubrec>(acks[1]).packet_id, 5);
    h.send(p, wire::Pubrel{5});
    EXPECT_EQ(std::get<wire::Pubcomp>(h.take(p).at(0)).packet_id, 5);
    EXPECT_EQ(h.publishes(s).size(), 1u);

    // After PUBREL the id is free again: a new message with it is routed.
    h.send(p, pub("t", "second", 2, 5));
    EXPECT_EQ(h.publishes(s).size(), 1u);
}

TEST(BrokerCore, Qos2OutboundHandshake) {
    CoreHarness h;
    auto s = h.connected("s");
    h.subscribe(s, {{"t", 2}});
    auto p = h.connected("p");
    h.send(p, pub("t", "x", 2, 1));
    auto got = h.publishes(s);
    ASSERT_EQ(got.size(), 1u);
    auto pid = *got[0].packet_id;
    h.send(s, wire::Pubrec{pid});
    auto rel = h.take(s);
    ASSERT_EQ(rel.size(), 1u);
    EXPECT_EQ(std::get<wire::Pubrel>(rel[0]).packet_id, pid);
    EXPECT_EQ(h.core.session("s")->inflight_out.at(pid).stage, OutboundStage::AwaitPubcomp);
    h.send(s, wire::Pubcomp{pid});
    EXPECT_TRUE(h.core.session("s")->inflight_out.empty());
}

TEST(BrokerCore, RetainedDeliveredToNewSubscriberAndDeleted) {
    CoreHarness h;
    auto p = h.connected("p");
    h.send(p, pub("home/livingroom/temperature", R"({"temperature": 23.4})", 0, std::nullopt, true));
    auto s = h.connected("s");
    EXPECT_EQ(h.subscribe(s, {{"#", 0}}), (std::vector<std::uint8_t>{0}));
    auto got = h.publishes(s);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_TRUE(got[0].retain);
    EXPECT_EQ(wire::to_string(got[0].payload), R"({"temperature": 23.4})");

    h.send(p, pub("home/livingroom/temperature", "", 0, std::nullopt, true));
    EXPECT_TRUE(h.core.retained().empty());
    // Live forwarding of a retained publish carries retain=0.
    auto live = h.publishes(s);
    ASSERT_EQ(live.size(), 1u);
    EXPECT_FALSE(live[0].retain);
    auto s2 = h.connected("s2");
    h.subscribe(s2, {{"#", 0}});
    EXPECT_TRUE(h.publishes(s2).empty());
}

TEST(BrokerCore, WillOnAbruptCloseOnly) {
    wire::WillMessage will{"home/edge/status", wire::to_bytes("offline"), 0, false};
    {
        CoreHarness h;
        auto s = h.connected("watch");
        h.subscribe(s, {{"home/#", 0}});
        auto e = h.connected("edge", true, will);
        h.lose(e);
        auto got = h.publishes(s);
        ASSERT_EQ(got.size(), 1u);
        EXPECT_EQ(got[0].topic, "home/edge/status");
        EXPECT_EQ(wire::to_string(got[0].payload), "offline");
    }
    {
        CoreHarness h;
        auto s = h.connected("watch");
        h.subscribe(s, {{"home/#", 0}});
        auto e = h.connected("edge", true, will);
        h.send(e, wire::Disconnect{});
        h.lose(e);
        EXPECT_TRUE(h.publishes(s).empty());
        EXPECT_EQ(h.core.stats().wills_published, 0u);
    }
}

TEST(BrokerCore, KeepAliveGraceFactor) {
    wire::WillMessage will{"home/edge/status", wire::to_bytes("offline"), 0, false};
    CoreHarness h;
    auto s = h.connected("watch");
    h.subscribe(s, {{"home/#", 0}});
    auto e = h.connected("edge", true, will, 2);
    h.advance(2900ms);
    EXPECT_FALSE(h.closed(e));
    h.advance(200ms);  // 3.1 s of silence > 1.5 x 2 s
    EXPECT_TRUE(h.closed(e));
    EXPECT_EQ(h.publishes(s).size(), 1u);
}

TEST(BrokerCore, TakeoverClosesOldConnectionWithoutWill) {
    wire::WillMessage will{"home/edge/status", wire::to_bytes("offline"), 0, false};
    CoreHarness h;
    auto s = h.connected("watch");
    h.subscribe(s, {{"home/#", 0}});
    auto first = h.connected("edge", true, will);
    auto second = h.connected("edge");
    EXPECT_TRUE(h.closed(first));
    EXPECT_FALSE(h.closed(second));
    EXPECT_TRUE(h.publishes(s).empty());
    EXPECT_EQ(h.core.session("edge")->connection, second);
}

TEST(BrokerCore, CleanSessionDiscardsState) {
    CoreHarness h;
    auto s = h.connected("sub", false);
    h.subscribe(s, {{"t", 1}});
    h.send(s, wire::Disconnect{});
    auto s2 = h.connected("sub", true);
    EXPECT_FALSE(h.last_session_present);
    auto p = h.connected("p");
    h.send(p, pub("t", "x", 1, 1));
    EXPECT_TRUE(h.publishes(s2).empty());
}

TEST(BrokerCore, InflightLimitSheds) {
    SecurityPolicy pol;
    pol.max_inflight_bytes = 100;
    CoreHarness h(pol);
    auto s = h.connected("slow", false);
    h.subscribe(s, {{"t", 1}});
    h.send(s, wire::Disconnect{});
    auto p = h.connected("p");
    for (int i = 0; i < 10; ++i) h.send(p, pub("t", std::string(30, 'x'), 1, static_cast<std::uint16_t>(i + 1)));
    // Each message holds 31 bytes; three fit under 100.
    EXPECT_EQ(h.core.session("slow")->queued.size(), 3u);
    EXPECT_EQ(h.core.stats().dropped_inflight, 7u);
}

TEST(BrokerCore, MaxPacketSizeClosesBeforeBodyArrives) {
    SecurityPolicy pol;
    pol.max_packet_size = 64;
    CoreHarness h(pol);
    auto c = h.connected("c");
    auto bytes = wire::encode_packet(pub("t", std::string(100, 'x')));
    h.send_raw(c, wire::Bytes(bytes.begin(), bytes.begin() + 3));
    EXPECT_TRUE(h.closed(c));
    EXPECT_EQ(h.core.stats().closed_oversize_packet, 1u);
}

TEST(BrokerCore, MessageSizeLimitDropsButAcks) {
    SecurityPolicy pol;
    pol.message_size_limit = 8;
    CoreHarness h(pol);
    auto s = h.connected("s");
    h.subscribe(s, {{"t", 0}});
    auto p = h.connected("p");
    h.send(p, pub("t", "123456789", 1, 3));
    EXPECT_EQ(std::get<wire::Puback>(h.take(p).at(0)).packet_id, 3);
    EXPECT_TRUE(h.publishes(s).empty());
    EXPECT_EQ(h.core.stats().dropped_oversize_message, 1u);
}

TEST(BrokerCore, EventsRecorded) {
    SecurityPolicy p;
    p.allow_anonymous = false;
    EventRecorder rec;
    CoreHarness h(p, &rec);
    h.connect(h.open(), anonymous());
    EXPECT_EQ(rec.count("auth_failure"), 1u);
}
