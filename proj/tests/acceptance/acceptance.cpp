// Acceptance suite: one PASS/FAIL line per criterion.
//
//   mqttbed_acceptance [--out DIR] [N ...]
//
// With no numbers every criterion runs. Exit status is 0 only if all selected
// criteria pass.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core_harness.hpp"
#include "hmac_vectors.hpp"
#include "loopback.hpp"
#include "mqttbed/attacks/brute_force.hpp"
#include "mqttbed/attacks/timing.hpp"
#include "mqttbed/harness/run.hpp"
#include "mqttbed/harness/scenario.hpp"
#include "mqttbed/smarthome/envelope.hpp"
#include "mqttbed/util/csv.hpp"
#include "mqttbed/wire/codec.hpp"
#include "mqttbed/wire/topic.hpp"
#include "packet_gen.hpp"
#include "topic_oracle.hpp"

using namespace mqttbed;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

using SteadyClock = std::chrono::steady_clock;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

double seconds_since(SteadyClock::time_point t) {
    return std::chrono::duration<double>(SteadyClock::now() - t).count();
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

std::string g_out_dir;

/// Runs a shipped scenario and returns its report plus wall time.
struct ScenarioRun {
    harness::ScenarioReport report;
    double wall_s = 0;
};

ScenarioRun run_shipped(const std::string& name) {
    auto cfg = harness::load_scenario(std::string(MQTTBED_SCENARIO_DIR) + "/" + name + ".json");
    harness::RunOptions opts;
    opts.output_dir = g_out_dir;
    auto start = SteadyClock::now();
    ScenarioRun r{harness::run_scenario(std::move(cfg), opts), 0};
    r.wall_s = seconds_since(start);
    require(r.report.status == "completed", name + " did not complete: " + r.report.error);
    require(r.report.attack.has_value(), name + " has no attack report");
    return r;
}

// ---------------------------------------------------------------------------

wire::Bytes varint_oracle(std::uint32_t n) {
    wire::Bytes out;
    do {
        std::uint8_t digit = n % 128;
        n /= 128;
        if (n > 0) digit |= 0x80;
        out.push_back(digit);
    } while (n > 0);
    return out;
}

std::string codec_soundness() {
    mqttbed::testing::PacketGenerator gen(20240601);
    constexpr int kPackets = 10000;
    for (int i = 0; i < kPackets; ++i) {
        auto p = gen.packet();
        auto bytes = wire::encode_packet(p);
        auto d = wire::decode_packet(bytes);
        require(d.has_value(), "packet " + std::to_string(i) + " did not decode");
        require(d->consumed == bytes.size(), "packet " + std::to_string(i) + " consumed a partial frame");
        require(d->packet == p, "packet " + std::to_string(i) + " did not round-trip");
    }
    const std::uint32_t boundaries[] = {0, 127, 128, 16383, 16384, 2097151, 2097152, 268435455};
    for (auto n : boundaries) {
        auto enc = wire::encode_remaining_length(n);
        require(enc == varint_oracle(n), "remaining length " + std::to_string(n) + " differs from oracle");
        auto dec = wire::decode_remaining_length(enc);
        require(dec && dec->value == n && dec->consumed == enc.size(),
                "remaining length " + std::to_string(n) + " did not decode");
    }
    return std::to_string(kPackets) + " round-trips, 8 boundary values";
}

std::string wildcard_oracle() {
    const std::vector<std::string> symbols{"a", "b", "c"};
    auto names = mqttbed::testing::all_names(symbols, 4);
    auto filters = mqttbed::testing::all_filters(symbols, 4);
    std::size_t checked = 0, agree = 0;
    std::string first_bad;
    for (auto& f : filters) {
        auto expected = mqttbed::testing::expand_filter(f, symbols, 4);
        for (auto& n : names) {
            ++checked;
            if (wire::topic_matches(f, n) == expected.contains(n))
                ++agree;
            else if (first_bad.empty())
                first_bad = f + " vs " + n;
        }
    }
    require(agree == checked, std::to_string(checked - agree) + " disagreements, first " + first_bad);
    return std::to_string(filters.size()) + " filters x " + std::to_string(names.size()) + " names, 100% agreement";
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open " + path);
    auto rows = util::parse_csv(in);
    require(!rows.empty() && rows.front().size() == 3 && rows.front()[2] == "payload", "bad CSV header in " + path);
    rows.erase(rows.begin());
    return rows;
}

std::string eavesdropping() {
    auto open = run_shipped("eavesdrop-open");
    const auto& m = open.report.measurements;
    auto in_window = m.at("device_messages_in_window").get<std::uint64_t>();
    auto ratio = m.at("capture_ratio").get<double>();
    require(in_window >= 100, "only " + std::to_string(in_window) + " device messages in the window");
    require(ratio >= 0.99, "capture ratio " + fmt(ratio));

    std::size_t temperature = 0, door = 0;
    for (auto& row : read_csv_rows(open.report.artifacts.at("eavesdrop_csv"))) {
        auto payload = json::parse(row.at(2), nullptr, false);
        if (!payload.is_object()) continue;
        if (payload.contains("temperature")) ++temperature;
        if (payload.contains("door_state")) ++door;
    }
    require(temperature > 0, "no temperature rows in the CSV");
    require(door > 0, "no door_state rows in the CSV");

    auto acl = run_shipped("eavesdrop-acl");
    require(acl.report.attack->outcome == "access denied", "acl outcome " + acl.report.attack->outcome);
    auto acl_rows = read_csv_rows(acl.report.artifacts.at("eavesdrop_csv"));
    require(acl_rows.empty(), std::to_string(acl_rows.size()) + " rows captured under ACL");

    return "captured " + fmt(ratio, 4) + " of " + std::to_string(in_window) + " (" + std::to_string(temperature) +
           " temperature, " + std::to_string(door) + " door rows); acl: access denied, 0 rows";
}

std::string tampering() {
    auto plain = run_shipped("tamper-plain");
    require(plain.wall_s < 60, "tamper-plain took " + fmt(plain.wall_s) + " s");
    const auto& p = plain.report.measurements;
    auto proxied = p.at("proxied_publishes").get<std::uint64_t>();
    auto tampered = p.at("tampered").get<std::uint64_t>();
    require(proxied > 0 && tampered > 0, "no proxied or tampered publishes");
    require(p.at("length_changed").get<std::uint64_t>() == 0, "encoded length changed");
    auto on = p.at("ac_on_from_tampered").get<std::uint64_t>();
    auto truly_below = p.at("tampered_true_value_at_or_below_threshold").get<std::uint64_t>();
    require(on > 0, "edge never switched the AC on from a 999.9 reading");
    require(truly_below > 0, "no tampered reading replaced a value at or below the threshold");

    auto sealed = run_shipped("tamper-hmac");
    require(sealed.wall_s < 60, "tamper-hmac took " + fmt(sealed.wall_s) + " s");
    const auto& s = sealed.report.measurements;
    require(s.at("tampered").get<std::uint64_t>() > 0, "nothing tampered under HMAC");
    require(s.at("tampered_accepted").get<std::uint64_t>() == 0, "tampered message accepted");
    require(s.at("tampered_rejected_ratio").get<double>() == 1.0, "not every tampered message rejected");
    require(s.at("untampered_published").get<std::uint64_t>() > 0, "no untampered traffic");
    require(s.at("untampered_accepted_ratio").get<double>() == 1.0,
            "untampered acceptance " + fmt(s.at("untampered_accepted_ratio").get<double>()));

    return std::to_string(proxied) + " proxied, lengths unchanged, AC on " + std::to_string(on) + "x (" +
           std::to_string(truly_below) + " against a true value <= threshold); hmac: " +
           std::to_string(s.at("tampered").get<std::uint64_t>()) + " tampered all rejected, untampered all accepted";
}

std::string dos_degradation() {
    auto r = run_shipped("dos-baseline");
    const auto& m = r.report.measurements;
    require(m.at("broker_survived").get<bool>(), "broker did not survive");
    require(m.at("attempted").get<std::uint64_t>() == 200u * 500u, "attempted " + m.at("attempted").dump());
    require(m.at("degradation_ratio").is_number(), "no degradation ratio (missing samples)");
    require(m.at("recovery_ratio").is_number(), "no recovery ratio (missing samples)");
    auto degradation = m.at("degradation_ratio").get<double>();
    auto recovery = m.at("recovery_ratio").get<double>();
    require(degradation >= 10, "degradation ratio " + fmt(degradation));
    require(recovery < 5, "recovery ratio " + fmt(recovery));
    return "degradation " + fmt(degradation) + "x, recovery " + fmt(recovery) + "x, broker survived";
}

std::string brute_scaling() {
    broker::SecurityPolicy policy;
    policy.allow_anonymous = false;
    policy.add_user("edge", "Out-Of-Space!");  // uppercase and punctuation: never enumerated
    mqttbed::testing::LoopbackBroker b(policy);

    auto exhaust = [&](std::size_t length) {
        attacks::BruteForceConfig cfg;
        cfg.alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
        cfg.min_length = cfg.max_length = length;
        cfg.username = "edge";
        cfg.max_rate = 200;
        auto start = SteadyClock::now();
        auto result = attacks::brute_force(cfg, b.endpoint());
        double t = seconds_since(start);
        auto expected = static_cast<std::uint64_t>(std::pow(36.0, static_cast<double>(length)));
        require(result.outcome == "exhausted", "length " + std::to_string(length) + " outcome " + result.outcome);
        require(result.attempts == expected, "length " + std::to_string(length) + " attempts " +
                                                 std::to_string(result.attempts));
        return std::pair{t, result};
    };
    auto [t2, r2] = exhaust(2);
    auto [t3, r3] = exhaust(3);
    double ratio = t3 / t2;
    require(std::abs(ratio - 36.0) <= 0.2 * 36.0, "t3/t2 = " + fmt(ratio));

    require(r3.projected_length == 4, "projection targets length " + std::to_string(r3.projected_length));
    double reference = std::pow(36.0, 4) / (46656.0 / t3);
    double rel = std::abs(r3.projected_seconds - reference) / reference;
    require(rel <= 0.10, "projected " + fmt(r3.projected_seconds) + " s vs " + fmt(reference) + " s");

    return "t2 " + fmt(t2) + " s, t3 " + fmt(t3) + " s, ratio " + fmt(ratio) + "; projected(4) " +
           fmt(r3.projected_seconds, 6) + " s vs " + fmt(reference, 6) + " s";
}

std::string ban_mitigation() {
    auto open = run_shipped("brute-open");
    auto banned = run_shipped("brute-banned");
    double open_rate = open.report.attack->details.at("rate").get<double>();
    double banned_rate = banned.report.attack->details.at("rate").get<double>();
    require(open_rate > 0, "brute-open measured no attempts");
    require(banned.report.attack->outcome == "rate-limited", "banned outcome " + banned.report.attack->outcome);
    double factor = banned_rate > 0 ? open_rate / banned_rate : INFINITY;
    require(factor >= 10, "throughput only " + fmt(factor) + "x lower");
    return "open " + fmt(open_rate) + "/s, banned " + fmt(banned_rate) + "/s (" + fmt(factor) +
           "x lower), outcome rate-limited";
}

std::string timing_null_result() {
    auto r = run_shipped("timing-probe");
    const auto& a = *r.report.attack;
    require(a.counters.at("samples_valid_user") == 500 && a.counters.at("samples_unknown_user") == 500,
            "expected 500 samples per class");
    require(a.details.at("alpha").get<double>() == 0.01, "alpha is not 0.01");
    bool real = a.details.at("significant").get<bool>();
    require(!real, "broker timing flagged significant, p = " + fmt(a.details.at("p_value").get<double>()));

    std::mt19937_64 rng(5150);
    std::normal_distribution<double> fast(0.005, 0.001), slow(0.015, 0.001);
    std::vector<double> x(500), y(500);
    for (auto& v : x) v = fast(rng);
    for (auto& v : y) v = slow(rng);
    auto synthetic = attacks::welch_test(x, y, 0.01);
    require(synthetic.significant, "synthetic 5 ms vs 15 ms not significant");

    return "broker p = " + fmt(a.details.at("p_value").get<double>()) + " (not significant); synthetic p = " +
           fmt(synthetic.p_value) + " (significant)";
}

std::string text_of(const wire::Publish& p) { return wire::to_string(p.payload); }

std::string qos_semantics() {
    // qos 1: persistent subscriber stops acknowledging, drops, comes back.
    int duplicates = 0;
    {
        mqttbed::testing::LoopbackBroker b;
        constexpr int kMessages = 50;
        {
            auto opts = b.client("persistent", false);
            opts.auto_ack = false;
            net::MqttClient sub(opts);
            require(sub.connect().return_code == 0, "qos1 subscriber refused");
            require(sub.subscribe({{"home/#", 1}}, 2000ms).has_value(), "qos1 subscribe failed");
            net::MqttClient pub(b.client("publisher"));
            require(pub.connect().return_code == 0, "publisher refused");
            for (int i = 0; i < kMessages; ++i)
                require(pub.publish_confirmed("home/seq", wire::to_bytes(std::to_string(i)), 1, false, 2000ms),
                        "qos1 publish not acknowledged");
            int seen = 0;
            while (seen < 20 && sub.next_message(2000ms)) ++seen;
            require(seen == 20, "first session saw " + std::to_string(seen));
            sub.abort();
        }
        std::map<std::string, int> counts;
        net::MqttClient again(b.client("persistent", false));
        auto ack = again.connect();
        require(ack.return_code == 0 && ack.session_present, "session not resumed");
        while (auto m = again.next_message(1500ms)) {
            ++counts[text_of(*m)];
            if (m->dup) ++duplicates;
        }
        for (int i = 0; i < kMessages; ++i)
            require(counts[std::to_string(i)] >= 1, "qos1 message " + std::to_string(i) + " never delivered");
        require(duplicates >= 1, "no redelivery flagged as duplicate");
    }
    // qos 2: every PUBLISH sent three times before PUBREL.
    {
        mqttbed::testing::LoopbackBroker b;
        auto sub_opts = b.client("exact");
        sub_opts.dedupe_qos2 = false;
        net::MqttClient sub(sub_opts);
        require(sub.connect().return_code == 0, "qos2 subscriber refused");
        require(sub.subscribe({{"t/#", 2}}, 2000ms).has_value(), "qos2 subscribe failed");
        auto pub_opts = b.client("dup-publisher");
        pub_opts.auto_ack = false;
        net::MqttClient pub(pub_opts);
        require(pub.connect().return_code == 0, "qos2 publisher refused");
        constexpr std::uint16_t kMessages = 20;
        for (std::uint16_t i = 1; i <= kMessages; ++i) {
            wire::Publish p{false, 2, false, "t/x", i, wire::to_bytes("m" + std::to_string(i))};
            pub.send(p);
            p.dup = true;
            pub.send(p);
            pub.send(p);
            require(pub.wait_for([&](const wire::ControlPacket& c) {
                auto* r = std::get_if<wire::Pubrec>(&c);
                return r && r->packet_id == i;
            }, 2000ms).has_value(), "no PUBREC");
            pub.send(wire::Pubrel{i});
            require(pub.wait_for([&](const wire::ControlPacket& c) {
                auto* r = std::get_if<wire::Pubcomp>(&c);
                return r && r->packet_id == i;
            }, 2000ms).has_value(), "no PUBCOMP");
        }
        std::map<std::string, int> counts;
        while (auto m = sub.next_message(1000ms)) ++counts[text_of(*m)];
        for (std::uint16_t i = 1; i <= kMessages; ++i)
            require(counts["m" + std::to_string(i)] == 1,
                    "qos2 message m" + std::to_string(i) + " delivered " + std::to_string(counts["m" + std::to_string(i)]) + "x");
        require(counts.size() == kMessages, "unexpected qos2 deliveries");
    }
    // Retained: stored, delivered to late subscribers, cleared by an empty payload.
    {
        mqttbed::testing::LoopbackBroker b;
        net::MqttClient pub(b.client("sensor"));
        require(pub.connect().return_code == 0, "retain publisher refused");
        require(pub.publish_confirmed("home/livingroom/temperature", wire::to_bytes(R"({"temperature": 23.4})"), 1,
                                      true, 2000ms), "retained publish failed");
        net::MqttClient late(b.client("late"));
        require(late.connect().return_code == 0, "late subscriber refused");
        require(late.subscribe({{"home/#", 0}}, 2000ms).has_value(), "late subscribe failed");
        auto m = late.next_message(2000ms);
        require(m && m->retain && text_of(*m) == R"({"temperature": 23.4})", "retained message not delivered");
        require(pub.publish_confirmed("home/livingroom/temperature", {}, 1, true, 2000ms), "retained clear failed");
        late.next_message(500ms);  // the live empty publish
        net::MqttClient later(b.client("later"));
        require(later.connect().return_code == 0, "later subscriber refused");
        require(later.subscribe({{"home/#", 0}}, 2000ms).has_value(), "later subscribe failed");
        require(!later.next_message(500ms), "retained message survived an empty retained publish");
    }
    // Last will: suppressed on DISCONNECT, published on abrupt loss.
    {
        mqttbed::testing::LoopbackBroker b;
        net::MqttClient watcher(b.client("watcher"));
        require(watcher.connect().return_code == 0, "watcher refused");
        require(watcher.subscribe({{"home/edge/status", 0}}, 2000ms).has_value(), "watcher subscribe failed");
        auto opts = b.client("edge");
        opts.will = wire::WillMessage{"home/edge/status", wire::to_bytes("offline"), 0, false};
        {
            net::MqttClient graceful(opts);
            require(graceful.connect().return_code == 0, "will client refused");
            graceful.disconnect();
        }
        require(!watcher.next_message(500ms), "will published after graceful DISCONNECT");
        {
            net::MqttClient abrupt(opts);
            require(abrupt.connect().return_code == 0, "will client refused");
            abrupt.abort();
        }
        auto m = watcher.next_message(2000ms);
        require(m && text_of(*m) == "offline", "will not published after abrupt loss");
    }
    return "qos1 all delivered (" + std::to_string(duplicates) +
           " flagged duplicates), qos2 exactly once, retained and will behave";
}

std::string mac_envelope() {
    auto vectors = mqttbed::testing::rfc4231_vectors();
    for (auto& v : vectors) {
        auto tag = smarthome::hmac_sha256(v.key, v.data);
        require(mqttbed::testing::to_hex(wire::Bytes(tag.begin(), tag.end())) == v.expected_hex, v.name + " mismatch");
    }
    smarthome::EnvelopeKey key{};
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<std::uint8_t>(i * 7 + 1);
    const std::string topic = "home/livingroom/temperature";
    auto sealed = smarthome::seal(wire::to_bytes(R"({"temperature": 24.56})"), topic, key).to_wire();
    require(smarthome::open_wire(sealed, topic, key).has_value(), "fixture does not verify");
    std::size_t rejected = 0;
    for (std::size_t i = 0; i < sealed.size(); ++i) {
        for (std::uint8_t mask : {0x01, 0x80, 0xFF}) {
            auto bad = sealed;
            bad[i] ^= mask;
            require(!smarthome::open_wire(bad, topic, key).has_value(), "corruption at byte " + std::to_string(i) +
                                                                            " accepted");
            ++rejected;
        }
    }
    return std::to_string(vectors.size()) + " RFC 4231 vectors match; " + std::to_string(rejected) +
           " corruptions over " + std::to_string(sealed.size()) + " byte positions rejected";
}

struct Criterion {
    int id;
    const char* title;
    double limit_s;  // 0 = no runtime bound
    std::function<std::string()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    g_out_dir = MQTTBED_ACCEPTANCE_OUT;
    if (const char* env = std::getenv(harness::kOutputDirEnv); env && *env) g_out_dir = env;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--out" && i + 1 < argc) {
            g_out_dir = argv[++i];
        } else {
            try {
                selected.insert(std::stoi(a));
            } catch (const std::exception&) {
                std::cerr << "usage: " << argv[0] << " [--out DIR] [criterion ...]\n";
                return 2;
            }
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "codec soundness", 10, codec_soundness},
        {2, "wildcard oracle equivalence", 30, wildcard_oracle},
        {3, "eavesdropping", 0, eavesdropping},
        {4, "tampering", 120, tampering},
        {5, "dos degradation", 300, dos_degradation},
        {6, "brute-force exponential scaling", 360, brute_scaling},
        {7, "ban mitigation", 180, ban_mitigation},
        {8, "timing-attack null result", 120, timing_null_result},
        {9, "qos semantics", 60, qos_semantics},
        {10, "mac envelope known answers", 10, mac_envelope},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) continue;
        auto start = SteadyClock::now();
        bool pass = true;
        std::string detail;
        try {
            detail = c.run();
        } catch (const std::exception& e) {
            pass = false;
            detail = e.what();
        }
        double elapsed = seconds_since(start);
        if (pass && c.limit_s > 0 && elapsed >= c.limit_s) {
            pass = false;
            detail += "; runtime " + fmt(elapsed) + " s exceeds " + fmt(c.limit_s) + " s";
        }
        if (!pass) ++failed;
        std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << "  " << c.title << "  (" << fmt(elapsed)
                  << " s)  " << detail << std::endl;
    }
    std::cout << (failed ? "acceptance: " + std::to_string(failed) + " failed" : std::string("acceptance: all passed"))
              << std::endl;
    return failed ? 1 : 0;
}
