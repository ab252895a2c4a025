#include "mqttbed/harness/run.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "mqttbed/attacks/proxy.hpp"
#include "mqttbed/broker/server.hpp"
#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/telemetry/probe.hpp"
#include "mqttbed/util/csv.hpp"
#include "mqttbed/util/system.hpp"
#include "mqttbed/util/time.hpp"

namespace mqttbed::harness {

using nlohmann::json;
using SteadyClock = std::chrono::steady_clock;
namespace fs = std::filesystem;

bool ScenarioReport::passed() const {
    if (status != "completed") return false;
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

json ScenarioReport::to_json() const {
    json v = json::array();
    for (const auto& x : verdicts)
        v.push_back({{"name", x.name}, {"pass", x.pass}, {"measured", x.measured}, {"expected", x.expected}});
    json telemetry_block = nullptr;
    if (!samples.empty()) {
        telemetry_block = telemetry::to_json(telemetry::summarize(samples));
        telemetry_block["samples"] = samples.size();
    }
    json edge_block = nullptr;
    if (edge) {
        edge_block = {{"accepted", edge->accepted},         {"rejected", edge->rejected},
                      {"rejected_mac", edge->rejected_mac}, {"commands_emitted", edge->commands_emitted},
                      {"ac_on", edge->ac_on},               {"ac_off", edge->ac_off},
                      {"light_on", edge->light_on},         {"light_off", edge->light_off}};
    }
    return {{"schema_version", schema_version},
            {"scenario", scenario},
            {"status", status},
            {"error", error.empty() ? json(nullptr) : json(error)},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"duration_s", duration_s},
            {"seed", seed},
            {"config", config},
            {"telemetry", telemetry_block},
            {"attack", attack ? attack->to_json() : json(nullptr)},
            {"edge", edge_block},
            {"devices", devices},
            {"broker", broker},
            {"measurements", measurements},
            {"verdicts", v},
            {"artifacts", artifacts},
            {"passed", passed()}};
}

namespace {

SteadyClock::duration secs(double s) {
    return std::chrono::duration_cast<SteadyClock::duration>(std::chrono::duration<double>(s));
}

struct Logger {
    std::ostream* out;
    SteadyClock::time_point start;
    void operator()(const std::string& line) const {
        if (!out) return;
        char buf[32];
        std::snprintf(buf, sizeof buf, "[%7.2fs] ", util::seconds_between(start, SteadyClock::now()));
        *out << buf << line << std::endl;
    }
};

struct AttackRun {
    attacks::AttackReport report;
    std::optional<attacks::EavesdropResult> eavesdrop;
    std::optional<attacks::StressReport> stress;
    std::optional<attacks::BruteForceResult> brute;
    std::optional<attacks::TimingProbeResult> timing;
    double probe_time_start = 0;
    double probe_time_end = 0;
};

// Everything observed during the run that verdicts draw on.
struct Observations {
    AttackRun attack;
    std::vector<attacks::PublishRecord> proxy_records;
    std::vector<smarthome::EdgeDecision> decisions;
    std::uint64_t device_publishes = 0;
    std::vector<std::pair<std::string, SteadyClock::time_point>> device_sends;  // topic, time
    bool broker_alive_after_attack = false;
};

std::optional<double> parse_number(const std::string& s) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

std::optional<double> payload_temperature(const wire::Bytes& payload) {
    auto j = json::parse(payload.begin(), payload.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("temperature") || !j["temperature"].is_number())
        return std::nullopt;
    return j["temperature"].get<double>();
}

std::optional<double> median_of_states(const std::vector<telemetry::LatencySample>& samples,
                                       const std::set<std::string>& states, double from = -1e300,
                                       double to = 1e300) {
    std::vector<double> v;
    for (const auto& s : samples)
        if (states.count(s.network_state) && s.delivered() && s.sent_at >= from && s.sent_at <= to)
            v.push_back(*s.latency());
    if (v.empty()) return std::nullopt;
    return telemetry::median_of(v);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void measure(const ScenarioConfig& cfg, const Observations& obs, ScenarioReport& report) {
    auto& m = report.measurements;
    const auto& a = obs.attack;
    switch (cfg.attack.kind) {
        case AttackKind::Eavesdrop: {
            if (!a.eavesdrop) break;
            const auto& e = *a.eavesdrop;
            std::set<std::string> device_topics;
            for (const auto& d : cfg.devices) device_topics.insert(d.sensor.topic);
            std::uint64_t captured = 0;
            for (const auto& r : e.rows)
                if (device_topics.count(r.topic)) ++captured;
            std::uint64_t expected = 0;
            if (e.subscribed_at && e.capture_end) {
                auto until = *e.capture_end - std::chrono::milliseconds(200);
                for (const auto& [topic, at] : obs.device_sends)
                    if (at >= *e.subscribed_at && at <= until) ++expected;
            }
            m["rows"] = e.rows.size();
            m["device_messages_captured"] = captured;
            m["device_messages_in_window"] = expected;
            m["capture_ratio"] =
                expected ? std::min(1.0, static_cast<double>(captured) / static_cast<double>(expected)) : 0.0;
            json fields = json::object();
            for (const char* f : {"temperature", "door_state"}) {
                std::string needle = std::string("{\"") + f + "\"";
                fields[f] = std::count_if(e.rows.begin(), e.rows.end(),
                                          [&](const auto& r) { return r.payload.rfind(needle, 0) == 0; });
            }
            m["rows_with_field"] = fields;
            break;
        }
        case AttackKind::Tamper: {
            std::uint64_t changed = 0, tampered = 0, true_below = 0;
            std::set<double> replacements;
            for (const auto& r : cfg.attack.tamper_rules)
                if (auto v = parse_number(r.replacement)) replacements.insert(*v);
            for (const auto& r : obs.proxy_records) {
                if (r.encoded_in != r.encoded_out) ++changed;
                if (r.status != attacks::TamperStatus::Tampered) continue;
                ++tampered;
                auto original = payload_temperature(r.original_payload);
                if (original && *original <= cfg.edge.rules.ac_threshold) ++true_below;
            }
            std::uint64_t tampered_accepted = 0, ac_on_from_tampered = 0;
            for (const auto& d : obs.decisions) {
                if (!d.temperature || !replacements.count(*d.temperature)) continue;
                ++tampered_accepted;
                if (d.command.on) ++ac_on_from_tampered;
            }
            std::uint64_t accepted = obs.decisions.size();
            std::uint64_t untampered = obs.device_publishes >= tampered ? obs.device_publishes - tampered : 0;
            auto rejected_mac = report.edge ? report.edge->rejected_mac : 0;
            m["proxied_publishes"] = obs.proxy_records.size();
            m["length_changed"] = changed;
            m["tampered"] = tampered;
            m["tampered_true_value_at_or_below_threshold"] = true_below;
            m["tampered_accepted"] = tampered_accepted;
            m["ac_on_from_tampered"] = ac_on_from_tampered;
            m["tampered_rejected_ratio"] =
                tampered ? std::min(1.0, static_cast<double>(rejected_mac) / static_cast<double>(tampered)) : 0.0;
            m["untampered_published"] = untampered;
            m["untampered_accepted"] = accepted - tampered_accepted;
            m["untampered_accepted_ratio"] =
                untampered ? static_cast<double>(accepted - tampered_accepted) / static_cast<double>(untampered) : 0.0;
            break;
        }
        case AttackKind::Dos: {
            const auto window = cfg.expect.value("recovery_window_s", 60.0);
            auto base = median_of_states(report.samples, {kStateNormal});
            auto attack = median_of_states(report.samples, {kStateDosInitiated, kStateDosActive});
            auto post = median_of_states(report.samples, {kStatePostAttack}, a.probe_time_end, a.probe_time_end + window);
            m["baseline_median_s"] = opt(base);
            m["attack_median_s"] = opt(attack);
            m["post_attack_median_s"] = opt(post);
            m["degradation_ratio"] = base && attack && *base > 0 ? json(*attack / *base) : json(nullptr);
            m["recovery_ratio"] = base && post && *base > 0 ? json(*post / *base) : json(nullptr);
            m["attack_duration_s"] = a.probe_time_end - a.probe_time_start;
            m["broker_survived"] = obs.broker_alive_after_attack;
            if (a.stress) m["attempted"] = a.stress->attempted;
            break;
        }
        case AttackKind::Brute: {
            if (!a.brute) break;
            const auto& b = *a.brute;
            m["outcome"] = b.outcome;
            m["found"] = b.found ? json(*b.found) : json(nullptr);
            m["attempts"] = b.attempts;
            m["rate"] = b.rate;
            m["rate_fraction_of_throttle"] =
                cfg.attack.brute.max_rate > 0 ? json(b.rate / cfg.attack.brute.max_rate) : json(nullptr);
            break;
        }
        case AttackKind::Timing: {
            if (!a.timing) break;
            m["significant"] = a.timing->test.significant;
            m["p_value"] = a.timing->test.p_value;
            break;
        }
        case AttackKind::None: break;
    }
}

Verdict check(const std::string& name, const json& measured, const json& expected, bool pass) {
    return Verdict{name, pass, measured, expected};
}

void evaluate(const ScenarioConfig& cfg, ScenarioReport& report) {
    const auto& m = report.measurements;
    auto num = [&](const char* key) -> std::optional<double> {
        if (!m.contains(key) || !m[key].is_number()) return std::nullopt;
        return m[key].get<double>();
    };
    auto at_least = [&](const std::string& name, const char* key, const json& exp) {
        auto v = num(key);
        report.verdicts.push_back(check(name, m.value(key, json(nullptr)), exp, v && *v >= exp.get<double>()));
    };
    auto at_most = [&](const std::string& name, const char* key, const json& exp) {
        auto v = num(key);
        report.verdicts.push_back(check(name, m.value(key, json(nullptr)), exp, v && *v <= exp.get<double>()));
    };
    auto equals = [&](const std::string& name, const json& measured, const json& exp) {
        report.verdicts.push_back(check(name, measured, exp, measured == exp));
    };
    const std::string attack_outcome = report.attack ? report.attack->outcome : std::string();

    for (const auto& [key, exp] : cfg.expect.items()) {
        if (key == "recovery_window_s") continue;
        if (key == "outcome") {
            equals("outcome", attack_outcome, exp);
        } else if (key == "min_capture_ratio") {
            at_least("capture_ratio", "capture_ratio", exp);
        } else if (key == "max_rows") {
            at_most("rows", "rows", exp);
        } else if (key == "min_rows") {
            at_least("rows", "rows", exp);
        } else if (key == "payload_fields") {
            for (const auto& f : exp) {
                auto count = m.contains("rows_with_field") ? m["rows_with_field"].value(f.get<std::string>(), 0) : 0;
                report.verdicts.push_back(check("captured_" + f.get<std::string>(), count, ">= 1", count >= 1));
            }
        } else if (key == "length_preserved") {
            auto changed = m.value("length_changed", -1);
            auto proxied = m.value("proxied_publishes", 0);
            report.verdicts.push_back(
                check("length_preserved", {{"length_changed", changed}, {"proxied_publishes", proxied}}, exp,
                      exp.get<bool>() == (changed == 0 && proxied > 0)));
        } else if (key == "min_tampered") {
            at_least("tampered", "tampered", exp);
        } else if (key == "edge_acted_on_tampered") {
            auto on = m.value("ac_on_from_tampered", 0);
            auto below = m.value("tampered_true_value_at_or_below_threshold", 0);
            report.verdicts.push_back(check("edge_acted_on_tampered",
                                            {{"ac_on_from_tampered", on}, {"true_value_at_or_below_threshold", below}},
                                            exp, exp.get<bool>() == (on > 0 && below > 0)));
        } else if (key == "max_tampered_accepted") {
            at_most("tampered_accepted", "tampered_accepted", exp);
        } else if (key == "min_tampered_rejected_ratio") {
            at_least("tampered_rejected_ratio", "tampered_rejected_ratio", exp);
        } else if (key == "min_untampered_accepted_ratio") {
            at_least("untampered_accepted_ratio", "untampered_accepted_ratio", exp);
        } else if (key == "min_degradation_ratio") {
            at_least("degradation_ratio", "degradation_ratio", exp);
        } else if (key == "max_recovery_ratio") {
            at_most("recovery_ratio", "recovery_ratio", exp);
        } else if (key == "broker_survived") {
            equals("broker_survived", m.value("broker_survived", false), exp);
        } else if (key == "min_attempted") {
            at_least("attempted", "attempted", exp);
        } else if (key == "found") {
            equals("found", m.value("found", json(nullptr)), exp);
        } else if (key == "max_rate_fraction") {
            at_most("rate_fraction_of_throttle", "rate_fraction_of_throttle", exp);
        } else if (key == "min_rate_fraction") {
            at_least("rate_fraction_of_throttle", "rate_fraction_of_throttle", exp);
        } else if (key == "significant") {
            equals("significant", m.value("significant", json(nullptr)), exp);
        } else {
            report.verdicts.push_back(check("unknown expectation " + key, nullptr, exp, false));
        }
    }
}

AttackRun run_attack_thread(const ScenarioConfig& cfg, const net::Endpoint& broker, smarthome::StopToken& stop) {
    AttackRun run;
    const auto& a = cfg.attack;
    switch (a.kind) {
        case AttackKind::Eavesdrop: {
            auto c = a.eavesdrop;
            c.broker = broker;
            c.bind_host = a.bind_host;
            c.duration_s = cfg.timeline.attack_duration_s;
            run.eavesdrop = attacks::eavesdrop(c, &stop);
            run.report = run.eavesdrop->report;
            break;
        }
        case AttackKind::Dos: {
            auto c = a.stress;
            c.bind_host = a.bind_host;
            attacks::ReportClock clock(run.report);
            run.stress = attacks::stress(c, broker, &stop);
            auto started = run.report.started_at;
            run.report = run.stress->to_attack_report();
            run.report.started_at = started;
            clock.finish();
            break;
        }
        case AttackKind::Brute: {
            auto c = a.brute;
            c.bind_host = a.bind_host;
            c.time_budget_s = cfg.timeline.attack_duration_s;
            run.brute = attacks::brute_force(c, broker, &stop);
            run.report = run.brute->report;
            break;
        }
        case AttackKind::Timing: {
            auto c = a.timing;
            c.broker = broker;
            c.bind_host = a.bind_host;
            run.timing = attacks::timing_probe(c);
            run.report = run.timing->report;
            break;
        }
        default: break;
    }
    return run;
}

bool broker_answers(const net::Endpoint& ep) {
    try {
        net::ClientOptions o;
        o.broker = ep;
        o.client_id = "harness-liveness";
        o.connect_timeout = net::Millis(10000);
        net::MqttClient c(o);
        auto ack = c.connect();
        // Any CONNACK means the broker is serving; anonymous may be refused.
        if (ack.return_code == 0) c.disconnect();
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

ScenarioReport run_scenario(ScenarioConfig cfg, const RunOptions& options) {
    if (options.seed) cfg.apply_seed(*options.seed);
    cfg.validate();
    util::raise_fd_limit();

    ScenarioReport report;
    report.scenario = cfg.name;
    report.seed = cfg.seed;
    report.config = cfg.source;
    report.config["seed"] = cfg.seed;
    report.started_at = util::iso8601_now();
    const auto t0 = SteadyClock::now();
    Logger log{options.log, t0};

    const fs::path dir = fs::path(resolve_output_dir(cfg, options.output_dir)) / cfg.name;
    fs::create_directories(dir);
    const auto report_path = (dir / "report.json").string();

    std::unique_ptr<broker::JsonLinesEventLog> events;
    std::unique_ptr<broker::BrokerServer> server;
    std::unique_ptr<attacks::MitmProxy> proxy;
    std::unique_ptr<smarthome::EdgeRunner> edge;
    std::vector<std::unique_ptr<smarthome::DeviceRunner>> devices;
    std::unique_ptr<telemetry::LatencyProbe> probe;
    Observations obs;
    smarthome::StopToken stop;

    auto at = [&](double s) { return t0 + secs(s); };

    try {
        const auto events_path = cfg.broker.event_log ? *cfg.broker.event_log : (dir / "broker-events.jsonl").string();
        events = std::make_unique<broker::JsonLinesEventLog>(events_path);
        report.artifacts["broker_events"] = events_path;
        server = std::make_unique<broker::BrokerServer>(cfg.broker.policy, cfg.broker.listen, events.get());
        server->start();
        const net::Endpoint broker_ep{cfg.broker.listen.host, server->port()};
        log("broker listening on " + broker_ep.str());

        net::Endpoint device_ep = broker_ep;
        if (cfg.attack.kind == AttackKind::Tamper) {
            proxy = std::make_unique<attacks::MitmProxy>(
                attacks::ProxyConfig{{cfg.broker.listen.host, 0}, broker_ep, {}});
            proxy->start();
            log("proxy listening on port " + std::to_string(proxy->port()));
        }

        if (cfg.edge.enabled) {
            edge = std::make_unique<smarthome::EdgeRunner>(
                smarthome::EdgeOptions{cfg.edge.rules, broker_ep, "edge-node", cfg.edge.credentials});
            edge->start();
            if (!edge->wait_ready(std::chrono::seconds(10))) throw std::runtime_error("edge node did not subscribe");
            log("edge node subscribed");
        }

        for (const auto& d : cfg.devices) {
            smarthome::DeviceOptions o;
            o.sensor = d.sensor;
            o.broker = broker_ep;
            if (d.via_proxy) o.broker = net::Endpoint{cfg.broker.listen.host, proxy->port()};
            o.envelope_key = cfg.envelope_key;
            o.credentials = d.credentials;
            devices.push_back(std::make_unique<smarthome::DeviceRunner>(o));
            devices.back()->start();
        }
        log(std::to_string(devices.size()) + " devices started");

        std::this_thread::sleep_until(at(cfg.timeline.warmup_s));
        if (cfg.probe.enabled) {
            telemetry::ProbeConfig pc;
            pc.broker = broker_ep;
            pc.interval_s = cfg.probe.interval_s;
            pc.qos = cfg.probe.qos;
            pc.loss_timeout_s = cfg.probe.loss_timeout_s;
            probe = std::make_unique<telemetry::LatencyProbe>(pc);
            probe->start();
            log("latency probe started");
        }

        std::this_thread::sleep_until(at(cfg.timeline.attack_start_s));
        const auto window_end = at(cfg.timeline.attack_start_s + cfg.timeline.attack_duration_s);
        const bool dos = cfg.attack.kind == AttackKind::Dos;
        if (cfg.attack.kind != AttackKind::None) {
            log("attack " + std::string(attack_kind_name(cfg.attack.kind)) + " starting");
            if (probe) probe->set_state(dos ? kStateDosInitiated : kStateAttack);
            obs.attack.probe_time_start = probe ? probe->now() : 0;
            if (cfg.attack.kind == AttackKind::Tamper) {
                proxy->set_rules(cfg.attack.tamper_rules);
                std::this_thread::sleep_until(window_end);
                proxy->set_rules({});
            } else {
                std::mutex mu;
                std::condition_variable cv;
                bool done = false;
                std::exception_ptr failure;
                std::thread worker([&] {
                    try {
                        auto run = run_attack_thread(cfg, broker_ep, stop);
                        std::lock_guard lock(mu);
                        obs.attack.report = std::move(run.report);
                        obs.attack.eavesdrop = std::move(run.eavesdrop);
                        obs.attack.stress = std::move(run.stress);
                        obs.attack.brute = std::move(run.brute);
                        obs.attack.timing = std::move(run.timing);
                    } catch (...) {
                        failure = std::current_exception();
                    }
                    std::lock_guard lock(mu);
                    done = true;
                    cv.notify_all();
                });
                const auto active_at = SteadyClock::now() + std::chrono::seconds(1);
                bool marked_active = false;
                {
                    std::unique_lock lock(mu);
                    while (!done && SteadyClock::now() < window_end) {
                        auto wake = dos && !marked_active ? std::min(active_at, window_end) : window_end;
                        cv.wait_until(lock, wake);
                        if (dos && !marked_active && SteadyClock::now() >= active_at && probe) {
                            probe->set_state(kStateDosActive);
                            marked_active = true;
                        }
                    }
                }
                stop.request_stop();
                worker.join();
                if (failure) std::rethrow_exception(failure);
            }
            if (probe) {
                probe->set_state(kStatePostAttack);
                obs.attack.probe_time_end = probe->now();
            }
            log("attack finished: " + obs.attack.report.outcome);
            if (dos) obs.broker_alive_after_attack = server->running() && broker_answers(broker_ep);
        }

        std::this_thread::sleep_until(at(cfg.timeline.total_s));
    } catch (const std::exception& e) {
        report.status = "aborted";
        report.error = e.what();
        log(std::string("aborted: ") + e.what());
        stop.request_stop();
    }

    // Ordered shutdown: attack (done above), devices, edge, probe, broker.
    for (auto& d : devices) d->stop();
    if (edge) {
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        edge->stop();
    }
    if (probe) probe->stop(std::chrono::milliseconds(static_cast<long>(cfg.probe.drain_s * 1000)));
    if (proxy) proxy->stop();
    if (server) {
        auto stats = server->stats();
        report.broker = {{"connections_accepted", stats.connections_accepted},
                         {"connections_refused", stats.connections_refused},
                         {"auth_failures", stats.auth_failures},
                         {"bans", stats.bans},
                         {"banned_refusals", stats.banned_refusals},
                         {"publishes_received", stats.publishes_received},
                         {"deliveries", stats.deliveries},
                         {"dropped_acl", stats.dropped_acl},
                         {"dropped_oversize_message", stats.dropped_oversize_message},
                         {"dropped_inflight", stats.dropped_inflight},
                         {"closed_oversize_packet", stats.closed_oversize_packet},
                         {"protocol_errors", stats.protocol_errors},
                         {"wills_published", stats.wills_published}};
        server->stop();
    }
    log("components stopped");

    for (std::size_t i = 0; i < devices.size(); ++i) {
        auto published = devices[i]->published();
        auto times = devices[i]->published_at();
        const auto& topic = cfg.devices[i].sensor.topic;
        obs.device_publishes += published.size();
        for (auto t : times) obs.device_sends.emplace_back(topic, t);
        report.devices.push_back({{"name", cfg.devices[i].sensor.name},
                                  {"topic", topic},
                                  {"published", published.size()},
                                  {"errors", devices[i]->errors()}});
    }
    if (edge) {
        report.edge = edge->counters();
        obs.decisions = edge->decisions();
    }
    if (probe) report.samples = probe->samples();
    if (proxy) {
        obs.proxy_records = proxy->records();
        obs.attack.report = proxy->report();
    }
    if (cfg.attack.kind != AttackKind::None && !obs.attack.report.kind.empty()) report.attack = obs.attack.report;

    if (report.status == "completed") {
        measure(cfg, obs, report);
        evaluate(cfg, report);
    }

    if (!report.samples.empty()) {
        const auto csv = (dir / "latency.csv").string();
        std::ofstream out(csv, std::ios::binary);
        telemetry::render_latency_csv(out, report.samples);
        report.artifacts["latency_csv"] = csv;
        const auto js = (dir / "latency.json").string();
        std::ofstream(js) << telemetry::render_latency_json(report.samples).dump(2) << '\n';
        report.artifacts["latency_json"] = js;
    }
    if (obs.attack.eavesdrop) {
        const auto csv = (dir / "eavesdrop.csv").string();
        attacks::write_capture_csv(csv, obs.attack.eavesdrop->rows);
        report.artifacts["eavesdrop_csv"] = csv;
    }
    report.artifacts["report"] = report_path;
    report.finished_at = util::iso8601_now();
    report.duration_s = util::seconds_between(t0, SteadyClock::now());
    std::ofstream(report_path) << report.to_json().dump(2) << '\n';
    log(std::string("report written: ") + (report.passed() ? "PASS" : "FAIL"));
    return report;
}

}  // namespace mqttbed::harness
