#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <thread>

#include "loopback.hpp"
#include "mqttbed/attacks/eavesdrop.hpp"
#include "mqttbed/attacks/proxy.hpp"
#include "mqttbed/attacks/stress.hpp"
#include "mqttbed/attacks/timing.hpp"
#include "mqttbed/harness/cli.hpp"
#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/telemetry/probe.hpp"
#include "mqttbed/wire/codec.hpp"

using namespace mqttbed;
using namespace std::chrono_literals;
using mqttbed::testing::LoopbackBroker;

namespace {

bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(10ms);
    }
    return pred();
}

bool has_subscription(const LoopbackBroker& b, const std::string& client_id) {
    bool found = false;
    b.server.inspect([&](const broker::BrokerCore& core) {
        auto* s = core.session(client_id);
        found = s && !s->subscriptions.empty();
    });
    return found;
}

}  // namespace

TEST(Eavesdrop, CapturesEveryMessageOnIdleBroker) {
    LoopbackBroker b;
    auto csv = (std::filesystem::temp_directory_path() / "mqttbed-eavesdrop-100.csv").string();
    attacks::EavesdropConfig cfg;
    cfg.broker = b.endpoint();
    cfg.output_csv = csv;
    cfg.duration_s = 30;
    smarthome::StopToken stop;
    attacks::EavesdropResult result;
    std::thread t([&] { result = attacks::eavesdrop(cfg, &stop); });
    ASSERT_TRUE(wait_until([&] { return has_subscription(b, "eavesdropper"); }, 5000ms));

    net::MqttClient pub(b.client("sensor"));
    ASSERT_EQ(pub.connect().return_code, 0);
    for (int i = 0; i < 100; ++i)
        ASSERT_TRUE(pub.publish_confirmed(i % 2 ? "home/hall/door" : "home/livingroom/temperature",
                                          wire::to_bytes(i % 2 ? R"({"door_state": "open"})" : R"({"temperature": 23.4})"),
                                          1, false, 2000ms));
    std::this_thread::sleep_for(500ms);
    stop.request_stop();
    t.join();

    EXPECT_EQ(result.report.outcome, "captured");
    EXPECT_EQ(result.rows.size(), 100u);
    auto rows = attacks::read_capture_csv(csv);
    ASSERT_EQ(rows.size(), 100u);
    EXPECT_EQ(rows[0].payload, R"({"temperature": 23.4})");
    EXPECT_EQ(rows[1].payload, R"({"door_state": "open"})");
    std::filesystem::remove(csv);
}

TEST(Eavesdrop, AnonymousDeniedYieldsNoRows) {
    broker::SecurityPolicy p;
    p.allow_anonymous = false;
    LoopbackBroker b(p);
    attacks::EavesdropConfig cfg;
    cfg.broker = b.endpoint();
    cfg.duration_s = 2;
    auto r = attacks::eavesdrop(cfg);
    EXPECT_EQ(r.report.outcome, "access denied");
    EXPECT_TRUE(r.rows.empty());
}

TEST(Eavesdrop, AclDeniedSubscription) {
    broker::SecurityPolicy p;
    p.enforce_acl = true;
    LoopbackBroker b(p);
    attacks::EavesdropConfig cfg;
    cfg.broker = b.endpoint();
    cfg.duration_s = 2;
    auto r = attacks::eavesdrop(cfg);
    EXPECT_EQ(r.report.outcome, "subscription denied");
    EXPECT_TRUE(r.rows.empty());
}

TEST(Proxy, EmptyRuleListRelaysBytesUnchanged) {
    wire::Bytes reply = wire::encode_packet(wire::Connack{false, 0});
    auto suback = wire::encode_packet(wire::Suback{1, {1}});
    reply.insert(reply.end(), suback.begin(), suback.end());
    mqttbed::testing::RecordingListener upstream(reply);

    attacks::ProxyConfig cfg;
    cfg.upstream = {"127.0.0.1", upstream.port()};
    attacks::MitmProxy proxy(cfg);
    proxy.start();

    wire::Bytes session;
    auto append = [&](const wire::ControlPacket& p) {
        auto b = wire::encode_packet(p);
        session.insert(session.end(), b.begin(), b.end());
    };
    wire::Connect c;
    c.client_id = "recorded";
    append(c);
    append(wire::Subscribe{1, {{"home/#", 1}}});
    for (std::uint16_t i = 1; i <= 20; ++i)
        append(wire::Publish{false, 1, false, "home/livingroom/temperature", i,
                             wire::to_bytes(R"({"temperature": 24.56})")});
    append(wire::Pingreq{});
    append(wire::Disconnect{});

    auto client = net::TcpStream::connect({"127.0.0.1", proxy.port()}, 2000ms);
    // Uneven chunks so frames straddle reads.
    for (std::size_t off = 0; off < session.size(); off += 7)
        client.send_all(std::span(session).subspan(off, std::min<std::size_t>(7, session.size() - off)));
    wire::Bytes down;
    std::uint8_t buf[256];
    while (down.size() < reply.size()) {
        auto n = client.recv_some(buf, 2000ms);
        if (!n || *n == 0) break;
        down.insert(down.end(), buf, buf + *n);
    }
    client.shutdown_write();
    EXPECT_EQ(upstream.wait_received(), session);
    EXPECT_EQ(down, reply);
    proxy.stop();
    EXPECT_EQ(proxy.counters().tampered, 0u);
}

namespace {

struct TamperRig {
    explicit TamperRig(std::optional<smarthome::EnvelopeKey> key) : key(key) {
        attacks::ProxyConfig pc;
        pc.upstream = broker.endpoint();
        pc.rules = {{"home/+/temperature", "temperature", "999.9"}};
        proxy = std::make_unique<attacks::MitmProxy>(pc);
        proxy->start();
        smarthome::EdgeOptions eo;
        eo.broker = broker.endpoint();
        eo.rules.envelope_key = key;
        edge = std::make_unique<smarthome::EdgeRunner>(eo);
        edge->start();
        EXPECT_TRUE(edge->wait_ready(5000ms));
    }

    void send_via_proxy(const std::vector<std::string>& payloads) {
        net::ClientOptions o;
        o.broker = {"127.0.0.1", proxy->port()};
        o.client_id = "temperature-sensor";
        net::MqttClient dev(o);
        ASSERT_EQ(dev.connect().return_code, 0);
        const std::string topic = "home/livingroom/temperature";
        for (auto& text : payloads) {
            auto body = wire::to_bytes(text);
            if (key) body = smarthome::seal(body, topic, *key).to_wire();
            ASSERT_TRUE(dev.publish_confirmed(topic, body, 1, false, 2000ms));
        }
        dev.disconnect();
    }

    LoopbackBroker broker;
    std::optional<smarthome::EnvelopeKey> key;
    std::unique_ptr<attacks::MitmProxy> proxy;
    std::unique_ptr<smarthome::EdgeRunner> edge;
};

}  // namespace

TEST(Proxy, TamperedReadingDrivesEdgeNode) {
    TamperRig rig(std::nullopt);
    rig.send_via_proxy({R"({"temperature": 24.56})", R"({"temperature": 23.40})"});
    ASSERT_TRUE(wait_until([&] { return rig.edge->decisions().size() >= 2; }, 5000ms));
    auto decisions = rig.edge->decisions();
    for (auto& d : decisions) {
        ASSERT_TRUE(d.temperature);
        EXPECT_DOUBLE_EQ(*d.temperature, 999.9);
        EXPECT_TRUE(d.command.on);  // including 23.40, which should have switched it off
    }
    for (auto& rec : rig.proxy->records()) {
        EXPECT_EQ(rec.status, attacks::TamperStatus::Tampered);
        EXPECT_EQ(rec.encoded_in, rec.encoded_out);
    }
    EXPECT_EQ(rig.proxy->counters().tampered, 2u);
}

TEST(Proxy, SealedPayloadsRejectedAfterTampering) {
    smarthome::EnvelopeKey key{};
    key.fill(0x42);
    TamperRig rig(key);
    std::vector<std::string> readings;
    for (int i = 0; i < 25; ++i) readings.push_back(R"({"temperature": 2)" + std::to_string(i % 10) + ".50}");
    rig.send_via_proxy(readings);
    ASSERT_TRUE(wait_until([&] { return rig.edge->counters().rejected >= 25; }, 5000ms));
    auto c = rig.edge->counters();
    EXPECT_EQ(c.rejected_mac, 25u);
    EXPECT_EQ(c.accepted, 0u);
    EXPECT_EQ(c.commands_emitted, 0u);
    EXPECT_EQ(rig.proxy->counters().tampered, 25u);
}

TEST(Stress, SmokeRunAllAcknowledged) {
    LoopbackBroker b;
    attacks::StressConfig cfg;
    cfg.client_count = 1;
    cfg.messages_per_client = 10;
    cfg.qos = 1;
    auto r = attacks::stress(cfg, b.endpoint());
    EXPECT_EQ(r.attempted, 10u);
    EXPECT_EQ(r.succeeded, 10u);
    EXPECT_EQ(r.failed, 0u);
}

TEST(Stress, Qos2Completes) {
    LoopbackBroker b;
    attacks::StressConfig cfg;
    cfg.client_count = 4;
    cfg.messages_per_client = 50;
    cfg.qos = 2;
    auto r = attacks::stress(cfg, b.endpoint());
    EXPECT_EQ(r.succeeded, 200u);
}

TEST(Stress, PacketLimitBelowFramingFailsEverything) {
    broker::SecurityPolicy p;
    p.max_packet_size = 32;
    LoopbackBroker b(p);
    attacks::StressConfig cfg;
    cfg.client_count = 5;
    cfg.messages_per_client = 20;
    cfg.payload_size = 64;
    cfg.ack_timeout_s = 3;
    auto r = attacks::stress(cfg, b.endpoint());
    EXPECT_EQ(r.attempted, 100u);
    EXPECT_EQ(r.succeeded, 0u);
    EXPECT_EQ(r.failed, 100u);
    EXPECT_EQ(r.connections_lost, 5u);
    EXPECT_EQ(b.server.stats().closed_oversize_packet, 5u);
}

TEST(Cli, BruteForceFindsPassword) {
    broker::SecurityPolicy p;
    p.add_user("edge", "cb");
    LoopbackBroker b(p);
    auto ep = b.endpoint().str();
    std::vector<const char*> argv{"mqttbed", "attack", "brute", "-b", ep.c_str(), "--alphabet", "abc",
                                  "--max-length", "2", "--username", "edge"};
    std::ostringstream out, err;
    EXPECT_EQ(harness::cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err), 0) << err.str();
    EXPECT_NE(out.str().find("found=cb attempts=11"), std::string::npos) << out.str();
}

TEST(Probe, HealthyLoopbackLatencyBound) {
    LoopbackBroker b;
    telemetry::ProbeConfig cfg;
    cfg.broker = b.endpoint();
    cfg.count = 10;
    cfg.interval_s = 0.05;
    auto samples = telemetry::probe_run(cfg);
    ASSERT_EQ(samples.size(), 10u);
    for (auto& s : samples) {
        ASSERT_TRUE(s.latency());
        EXPECT_LT(*s.latency(), 0.1);
        EXPECT_GE(*s.latency(), 0.0);
    }
}

TEST(Timing, SmallRunProducesValidStatistics) {
    broker::SecurityPolicy p;
    p.allow_anonymous = false;
    p.add_user("edge", "Edge-Node-2024");
    LoopbackBroker b(p);
    attacks::TimingProbeConfig cfg;
    cfg.broker = b.endpoint();
    cfg.valid_username = "edge";
    cfg.samples_per_class = 60;
    cfg.warmup_per_class = 5;
    auto r = attacks::timing_probe(cfg);
    EXPECT_EQ(r.valid_user_s.size(), 60u);
    EXPECT_EQ(r.unknown_user_s.size(), 60u);
    EXPECT_GE(r.test.p_value, 0.0);
    EXPECT_LE(r.test.p_value, 1.0);
    cfg.samples_per_class = 10;
    EXPECT_THROW(attacks::timing_probe(cfg), attacks::InsufficientSamples);
}
