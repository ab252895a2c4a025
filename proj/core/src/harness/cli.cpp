#include "mqttbed/harness/cli.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "mqttbed/attacks/brute_force.hpp"
#include "mqttbed/attacks/eavesdrop.hpp"
#include "mqttbed/attacks/proxy.hpp"
#include "mqttbed/attacks/stress.hpp"
#include "mqttbed/attacks/timing.hpp"
#include "mqttbed/broker/config.hpp"
#include "mqttbed/broker/server.hpp"
#include "mqttbed/harness/run.hpp"
#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/telemetry/probe.hpp"
#include "mqttbed/util/system.hpp"

namespace mqttbed::harness {

namespace {

using nlohmann::json;

volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_signal(int) { g_interrupted = 1; }

// Waits for the duration (0 = forever) or SIGINT/SIGTERM.
void run_for(double duration_s) {
    g_interrupted = 0;
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    auto end = std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(duration_s));
    while (!g_interrupted && (duration_s <= 0 || std::chrono::steady_clock::now() < end))
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
}

std::optional<wire::Credentials> make_credentials(const std::string& user, const std::string& pass) {
    if (user.empty()) return std::nullopt;
    wire::Credentials c;
    c.username = user;
    if (!pass.empty()) c.password = wire::to_bytes(pass);
    return c;
}

attacks::TamperRule parse_rule(const std::string& spec) {
    // filter:field=replacement
    auto colon = spec.find(':');
    auto eq = spec.find('=', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || eq == std::string::npos)
        throw CLI::ValidationError("--rule", "expected filter:field=replacement, got '" + spec + "'");
    return {spec.substr(0, colon), spec.substr(colon + 1, eq - colon - 1), spec.substr(eq + 1)};
}

void emit_report(const attacks::AttackReport& r, const std::string& path, bool as_json, std::ostream& out) {
    if (!path.empty()) r.write(path);
    if (as_json) out << r.to_json().dump(2) << '\n';
}

std::string text_of(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

void render_scenario_report(const json& j, std::ostream& out) {
    out << "scenario  " << j.value("scenario", "?") << '\n';
    out << "status    " << j.value("status", "?") << (j.value("passed", false) ? " (pass)" : " (fail)") << '\n';
    if (j.contains("error") && !j["error"].is_null()) out << "error     " << text_of(j["error"]) << '\n';
    if (j.contains("attack") && !j["attack"].is_null())
        out << "attack    " << text_of(j["attack"]["kind"]) << ": " << text_of(j["attack"]["outcome"]) << '\n';
    if (j.contains("telemetry") && !j["telemetry"].is_null()) {
        out << "\nlatency by state\n";
        out << "  state            count  lost   median_s      p95_s      max_s\n";
        for (const auto& s : j["telemetry"]["by_state"]) {
            char line[160];
            auto num = [](const json& v) { return v.is_number() ? v.get<double>() : std::nan(""); };
            std::snprintf(line, sizeof line, "  %-15s %6llu %5llu %10.3f %10.3f %10.3f\n",
                          s.value("state", "").c_str(), static_cast<unsigned long long>(s.value("count", 0ull)),
                          static_cast<unsigned long long>(s.value("lost", 0ull)), num(s["median_s"]),
                          num(s["p95_s"]), num(s["max_s"]));
            out << line;
        }
    }
    if (j.contains("verdicts")) {
        out << "\nverdicts\n";
        for (const auto& v : j["verdicts"])
            out << "  [" << (v.value("pass", false) ? "PASS" : "FAIL") << "] " << v.value("name", "")
                << "  measured=" << text_of(v["measured"]) << "  expected=" << text_of(v["expected"]) << '\n';
    }
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"mqttbed: MQTT security testbed (broker, smart home, attacks, telemetry)", "mqttbed"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mqttbed 0.1.0");

    int status = 0;

    // broker ---------------------------------------------------------------
    auto* broker_cmd = app.add_subcommand("broker", "Run a standalone broker from a policy file");
    std::string broker_config_path, broker_listen, broker_stats;
    double broker_duration = 0;
    broker_cmd->add_option("-c,--config", broker_config_path, "Key-value policy file");
    broker_cmd->add_option("-l,--listen", broker_listen, "host:port (overrides the file; default 127.0.0.1:1883)");
    broker_cmd->add_option("-d,--duration", broker_duration, "Seconds to run, 0 = until interrupted");
    broker_cmd->add_option("--stats-json", broker_stats, "Write final counters as JSON to this path");
    broker_cmd->callback([&] {
        broker::BrokerConfig cfg = broker_config_path.empty() ? broker::BrokerConfig{}
                                                              : broker::load_broker_config(broker_config_path);
        if (!broker_listen.empty()) {
            auto ep = net::Endpoint::parse(broker_listen);
            cfg.listen = {ep.host, ep.port};
        }
        std::unique_ptr<broker::JsonLinesEventLog> events;
        if (cfg.event_log) events = std::make_unique<broker::JsonLinesEventLog>(*cfg.event_log);
        broker::BrokerServer server(cfg.policy, cfg.listen, events.get());
        server.start();
        err << "broker listening on " << cfg.listen.host << ':' << server.port() << std::endl;
        run_for(broker_duration);
        auto s = server.stats();
        server.stop();
        json stats{{"connections_accepted", s.connections_accepted}, {"connections_refused", s.connections_refused},
                   {"auth_failures", s.auth_failures},             {"bans", s.bans},
                   {"publishes_received", s.publishes_received},   {"deliveries", s.deliveries},
                   {"dropped_acl", s.dropped_acl},                 {"protocol_errors", s.protocol_errors}};
        if (!broker_stats.empty()) std::ofstream(broker_stats) << stats.dump(2) << '\n';
    });

    // devices --------------------------------------------------------------
    auto* devices_cmd = app.add_subcommand("devices", "Run the simulated temperature and door sensors");
    std::string dev_broker = "127.0.0.1:1883", dev_key, dev_user, dev_pass;
    std::string dev_temp_topic = "home/livingroom/temperature", dev_door_topic = "home/hall/door";
    double dev_interval = 1.0, dev_duration = 0;
    int dev_qos = 0;
    std::uint64_t dev_seed = 42, dev_ticks = 0;
    devices_cmd->add_option("-b,--broker", dev_broker, "host:port")->capture_default_str();
    devices_cmd->add_option("--temperature-topic", dev_temp_topic)->capture_default_str();
    devices_cmd->add_option("--door-topic", dev_door_topic)->capture_default_str();
    devices_cmd->add_option("--interval", dev_interval, "Seconds between readings")->capture_default_str();
    devices_cmd->add_option("--qos", dev_qos)->check(CLI::Range(0, 2))->capture_default_str();
    devices_cmd->add_option("--seed", dev_seed, "Temperature seed; the door uses seed+1")->capture_default_str();
    devices_cmd->add_option("--ticks", dev_ticks, "Readings per device, 0 = unbounded");
    devices_cmd->add_option("--envelope-key", dev_key, "64 hex chars; seals payloads with HMAC-SHA256");
    devices_cmd->add_option("--username", dev_user);
    devices_cmd->add_option("--password", dev_pass);
    devices_cmd->add_option("-d,--duration", dev_duration, "Seconds to run, 0 = until interrupted");
    devices_cmd->callback([&] {
        auto ep = net::Endpoint::parse(dev_broker);
        std::optional<smarthome::EnvelopeKey> key;
        if (!dev_key.empty()) key = smarthome::key_from_hex(dev_key);
        std::vector<std::unique_ptr<smarthome::DeviceRunner>> runners;
        for (int i = 0; i < 2; ++i) {
            smarthome::SensorConfig s;
            s.kind = i == 0 ? smarthome::SensorKind::Temperature : smarthome::SensorKind::Door;
            s.name = i == 0 ? "temperature-sensor" : "door-sensor";
            s.topic = i == 0 ? dev_temp_topic : dev_door_topic;
            s.publish_interval_s = dev_interval;
            s.qos = static_cast<std::uint8_t>(dev_qos);
            s.seed = dev_seed + static_cast<std::uint64_t>(i);
            runners.push_back(std::make_unique<smarthome::DeviceRunner>(
                smarthome::DeviceOptions{s, ep, key, make_credentials(dev_user, dev_pass), dev_ticks}));
            runners.back()->start();
        }
        run_for(dev_duration);
        for (auto& r : runners) r->stop();
        for (auto& r : runners)
            err << r->options().sensor.name << ": published " << r->published().size() << ", errors " << r->errors()
                << '\n';
    });

    // edge -----------------------------------------------------------------
    auto* edge_cmd = app.add_subcommand("edge", "Run the edge automation node");
    std::string edge_broker = "127.0.0.1:1883", edge_key, edge_user, edge_pass;
    double edge_threshold = 24.0, edge_duration = 0;
    bool edge_json = false;
    edge_cmd->add_option("-b,--broker", edge_broker, "host:port")->capture_default_str();
    edge_cmd->add_option("--threshold", edge_threshold, "AC threshold in degrees C")->capture_default_str();
    edge_cmd->add_option("--envelope-key", edge_key, "64 hex chars; rejects readings whose MAC fails");
    edge_cmd->add_option("--username", edge_user);
    edge_cmd->add_option("--password", edge_pass);
    edge_cmd->add_option("-d,--duration", edge_duration, "Seconds to run, 0 = until interrupted");
    edge_cmd->add_flag("--json", edge_json, "Print final counters as JSON");
    edge_cmd->callback([&] {
        smarthome::EdgeOptions o;
        o.broker = net::Endpoint::parse(edge_broker);
        o.rules.ac_threshold = edge_threshold;
        if (!edge_key.empty()) o.rules.envelope_key = smarthome::key_from_hex(edge_key);
        o.credentials = make_credentials(edge_user, edge_pass);
        smarthome::EdgeRunner runner(o);
        runner.start();
        run_for(edge_duration);
        runner.stop();
        auto c = runner.counters();
        json j{{"accepted", c.accepted},       {"rejected", c.rejected}, {"rejected_mac", c.rejected_mac},
               {"commands", c.commands_emitted}, {"ac_on", c.ac_on},     {"ac_off", c.ac_off},
               {"light_on", c.light_on},       {"light_off", c.light_off}};
        if (edge_json)
            out << j.dump(2) << '\n';
        else
            out << "accepted=" << c.accepted << " rejected=" << c.rejected << " commands=" << c.commands_emitted
                << '\n';
    });

    // attack ---------------------------------------------------------------
    auto* attack_cmd = app.add_subcommand("attack", "Attack tools");
    attack_cmd->require_subcommand(1);

    auto* eav = attack_cmd->add_subcommand("eavesdrop", "Subscribe to a wildcard and log every message to CSV");
    attacks::EavesdropConfig eav_cfg;
    std::string eav_broker = "127.0.0.1:1883", eav_user, eav_pass, eav_report;
    bool eav_json = false;
    eav->add_option("-b,--broker", eav_broker, "host:port")->capture_default_str();
    eav->add_option("--filter", eav_cfg.filter)->capture_default_str();
    eav->add_option("--username", eav_user, "Omit to connect anonymously");
    eav->add_option("--password", eav_pass);
    eav->add_option("-o,--output", eav_cfg.output_csv, "CSV path")->required();
    eav->add_option("-d,--duration", eav_cfg.duration_s, "Capture seconds")->capture_default_str();
    eav->add_option("--bind", eav_cfg.bind_host, "Local source address");
    eav->add_option("--report", eav_report, "Write the AttackReport JSON here");
    eav->add_flag("--json", eav_json, "Print the AttackReport JSON");
    eav->callback([&] {
        eav_cfg.broker = net::Endpoint::parse(eav_broker);
        eav_cfg.credentials = make_credentials(eav_user, eav_pass);
        auto r = attacks::eavesdrop(eav_cfg);
        emit_report(r.report, eav_report, eav_json, out);
        if (!eav_json) out << "outcome=" << r.report.outcome << " captured=" << r.rows.size() << '\n';
        if (r.report.outcome == "connection failed") status = 1;
    });

    auto* tp = attack_cmd->add_subcommand("tamper-proxy", "Inline proxy rewriting PUBLISH payloads");
    std::string tp_listen = "127.0.0.1:1884", tp_upstream = "127.0.0.1:1883", tp_report;
    std::vector<std::string> tp_rules;
    double tp_duration = 0;
    bool tp_json = false;
    tp->add_option("-l,--listen", tp_listen, "host:port victims connect to")->capture_default_str();
    tp->add_option("-u,--upstream", tp_upstream, "Broker host:port")->capture_default_str();
    tp->add_option("-r,--rule", tp_rules, "filter:field=replacement, e.g. home/+/temperature:temperature=999.9");
    tp->add_option("-d,--duration", tp_duration, "Seconds to run, 0 = until interrupted");
    tp->add_option("--report", tp_report, "Write the AttackReport JSON here");
    tp->add_flag("--json", tp_json, "Print the AttackReport JSON");
    tp->callback([&] {
        attacks::ProxyConfig pc;
        auto l = net::Endpoint::parse(tp_listen);
        pc.listen = {l.host, l.port};
        pc.upstream = net::Endpoint::parse(tp_upstream);
        for (const auto& r : tp_rules) pc.rules.push_back(parse_rule(r));
        attacks::MitmProxy proxy(pc);
        proxy.start();
        err << "proxy listening on " << l.host << ':' << proxy.port() << " -> " << pc.upstream.str() << std::endl;
        run_for(tp_duration);
        proxy.stop();
        auto r = proxy.report();
        emit_report(r, tp_report, tp_json, out);
        if (!tp_json)
            out << "relayed=" << r.counters["packets_relayed"] << " tampered=" << r.counters["tampered"] << '\n';
    });

    auto* dos = attack_cmd->add_subcommand("dos", "Concurrent publish flood");
    attacks::StressConfig dos_cfg;
    std::string dos_broker = "127.0.0.1:1883", dos_report;
    int dos_qos = 1;
    bool dos_json = false;
    dos->add_option("-b,--broker", dos_broker, "host:port")->capture_default_str();
    dos->add_option("--clients", dos_cfg.client_count)->capture_default_str();
    dos->add_option("--messages", dos_cfg.messages_per_client, "Per client")->capture_default_str();
    dos->add_option("--qos", dos_qos)->check(CLI::Range(0, 2))->capture_default_str();
    dos->add_option("--payload-size", dos_cfg.payload_size)->capture_default_str();
    dos->add_option("--topic", dos_cfg.topic)->capture_default_str();
    dos->add_option("--connect-rate", dos_cfg.connect_rate, "Connections per second, 0 = unlimited");
    dos->add_option("--window", dos_cfg.inflight_window, "Unacknowledged publishes per client")
        ->capture_default_str();
    dos->add_option("--bind", dos_cfg.bind_host, "Local source address");
    dos->add_option("--report", dos_report, "Write the AttackReport JSON here");
    dos->add_flag("--json", dos_json, "Print the AttackReport JSON");
    dos->callback([&] {
        util::raise_fd_limit();
        dos_cfg.qos = static_cast<std::uint8_t>(dos_qos);
        auto r = attacks::stress(dos_cfg, net::Endpoint::parse(dos_broker));
        emit_report(r.to_attack_report(), dos_report, dos_json, out);
        if (!dos_json)
            out << "attempted=" << r.attempted << " succeeded=" << r.succeeded << " failed=" << r.failed
                << " throughput=" << r.throughput << '\n';
    });

    auto* brute = attack_cmd->add_subcommand("brute", "Enumerate passwords, one CONNECT per candidate");
    attacks::BruteForceConfig bf_cfg;
    std::string bf_broker = "127.0.0.1:1883", bf_report;
    bool bf_json = false;
    brute->add_option("-b,--broker", bf_broker, "host:port")->capture_default_str();
    brute->add_option("--alphabet", bf_cfg.alphabet)->capture_default_str();
    brute->add_option("--min-length", bf_cfg.min_length)->capture_default_str();
    brute->add_option("--max-length", bf_cfg.max_length)->capture_default_str();
    brute->add_option("--username", bf_cfg.username)->required();
    brute->add_option("--max-rate", bf_cfg.max_rate, "Attempts per second, 0 = unlimited");
    brute->add_option("--time-budget", bf_cfg.time_budget_s, "Seconds, 0 = until exhausted");
    brute->add_option("--start-index", bf_cfg.start_index, "Resume cursor from an earlier run");
    brute->add_option("--bind", bf_cfg.bind_host, "Local source address");
    brute->add_option("--report", bf_report, "Write the AttackReport JSON here");
    brute->add_flag("--json", bf_json, "Print the AttackReport JSON");
    brute->callback([&] {
        auto r = attacks::brute_force(bf_cfg, net::Endpoint::parse(bf_broker));
        emit_report(r.report, bf_report, bf_json, out);
        if (!bf_json) {
            out << "found=" << (r.found ? *r.found : std::string("none")) << " attempts=" << r.attempts
                << " outcome=" << r.outcome << " rate=" << r.rate << " projected_seconds("
                << r.projected_length << ")=" << r.projected_seconds << '\n';
        }
        if (r.outcome == "network-error") status = 1;
    });

    auto* timing = attack_cmd->add_subcommand("timing", "CONNECT latency side-channel probe");
    attacks::TimingProbeConfig tm_cfg;
    std::string tm_broker = "127.0.0.1:1883", tm_report;
    bool tm_json = false;
    timing->add_option("-b,--broker", tm_broker, "host:port")->capture_default_str();
    timing->add_option("--valid-user", tm_cfg.valid_username)->required();
    timing->add_option("--invalid-user", tm_cfg.invalid_username, "Default: same length as the valid user");
    timing->add_option("--samples", tm_cfg.samples_per_class, "Per class, at least 30")->capture_default_str();
    timing->add_option("--alpha", tm_cfg.alpha)->capture_default_str();
    timing->add_option("--bind", tm_cfg.bind_host, "Local source address");
    timing->add_option("--report", tm_report, "Write the AttackReport JSON here");
    timing->add_flag("--json", tm_json, "Print the AttackReport JSON");
    timing->callback([&] {
        tm_cfg.broker = net::Endpoint::parse(tm_broker);
        auto r = attacks::timing_probe(tm_cfg);
        emit_report(r.report, tm_report, tm_json, out);
        if (!tm_json) {
            out << "significant=" << (r.test.significant ? "true" : "false") << " p=" << r.test.p_value
                << " t=" << r.test.t_statistic << " mean_valid=" << r.test.a.mean << " mean_unknown=" << r.test.b.mean
                << '\n';
        }
    });

    // probe ----------------------------------------------------------------
    auto* probe_cmd = app.add_subcommand("probe", "End-to-end latency probe");
    telemetry::ProbeConfig pr_cfg;
    pr_cfg.count = 10;
    std::string pr_broker = "127.0.0.1:1883", pr_csv, pr_json_path;
    int pr_qos = 1;
    bool pr_json = false;
    probe_cmd->add_option("-b,--broker", pr_broker, "host:port")->capture_default_str();
    probe_cmd->add_option("--topic", pr_cfg.topic)->capture_default_str();
    probe_cmd->add_option("--count", pr_cfg.count)->capture_default_str();
    probe_cmd->add_option("--interval", pr_cfg.interval_s, "Seconds between probes")->capture_default_str();
    probe_cmd->add_option("--qos", pr_qos)->check(CLI::Range(0, 2))->capture_default_str();
    probe_cmd->add_option("--csv", pr_csv, "Write seq,network_state,latency_s here");
    probe_cmd->add_option("--json-out", pr_json_path, "Write samples and summary JSON here");
    probe_cmd->add_flag("--json", pr_json, "Print samples and summary JSON");
    probe_cmd->callback([&] {
        pr_cfg.broker = net::Endpoint::parse(pr_broker);
        pr_cfg.qos = static_cast<std::uint8_t>(pr_qos);
        std::vector<telemetry::LatencySample> samples;
        try {
            samples = telemetry::probe_run(pr_cfg);
        } catch (const telemetry::ServiceDenied&) {
            out << "outcome=service denied\n";
            status = 1;
            return;
        }
        if (!pr_csv.empty()) {
            std::ofstream f(pr_csv, std::ios::binary);
            telemetry::render_latency_csv(f, samples);
        }
        auto j = telemetry::render_latency_json(samples);
        if (!pr_json_path.empty()) std::ofstream(pr_json_path) << j.dump(2) << '\n';
        if (pr_json) {
            out << j.dump(2) << '\n';
        } else {
            telemetry::render_latency_csv(out, samples);
        }
    });

    // scenario -------------------------------------------------------------
    auto* scenario_cmd = app.add_subcommand("scenario", "Scenario orchestration");
    scenario_cmd->require_subcommand(1);
    auto* run_cmd = scenario_cmd->add_subcommand("run", "Run a scenario file and write its report");
    std::string sc_file, sc_out;
    std::uint64_t sc_seed = 0;
    bool sc_quiet = false, sc_json = false;
    run_cmd->add_option("file", sc_file, "Scenario JSON")->required();
    run_cmd->add_option("-o,--output-dir", sc_out,
                        std::string("Artifact directory (default: $") + kOutputDirEnv + " or ./mqttbed-out)");
    auto* seed_opt = run_cmd->add_option("--seed", sc_seed, "Override the scenario seed");
    run_cmd->add_flag("-q,--quiet", sc_quiet, "No progress lines");
    run_cmd->add_flag("--json", sc_json, "Print the report JSON instead of the summary");
    run_cmd->callback([&] {
        auto cfg = load_scenario(sc_file);
        RunOptions opts;
        opts.output_dir = sc_out;
        if (seed_opt->count()) opts.seed = sc_seed;
        opts.log = sc_quiet ? nullptr : &err;
        auto report = run_scenario(std::move(cfg), opts);
        if (sc_json)
            out << report.to_json().dump(2) << '\n';
        else
            render_scenario_report(report.to_json(), out);
        status = report.passed() ? 0 : 1;
    });

    // report ---------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "Report rendering");
    report_cmd->require_subcommand(1);
    auto* render_cmd = report_cmd->add_subcommand("render", "Render a scenario report or latency file");
    std::string rr_file, rr_format = "text";
    render_cmd->add_option("file", rr_file, "report.json, latency.json or latency.csv")
        ->required();
    render_cmd->add_option("-f,--format", rr_format, "text, json or csv")
        ->check(CLI::IsMember({"text", "json", "csv"}))
        ->capture_default_str();
    render_cmd->callback([&] {
        std::ifstream in(rr_file, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + rr_file);
        std::vector<telemetry::LatencySample> samples;
        json doc;
        if (rr_file.size() >= 4 && rr_file.substr(rr_file.size() - 4) == ".csv") {
            samples = telemetry::parse_latency_csv(in);
        } else {
            doc = json::parse(in);
            if (doc.contains("samples") && doc["samples"].is_array()) samples = telemetry::parse_latency_json(doc);
        }
        if (doc.contains("scenario")) {
            if (rr_format == "json")
                out << doc.dump(2) << '\n';
            else if (rr_format == "text")
                render_scenario_report(doc, out);
            else
                throw CLI::ValidationError("--format", "csv applies to latency files only");
            return;
        }
        if (rr_format == "csv") {
            telemetry::render_latency_csv(out, samples);
        } else if (rr_format == "json") {
            out << telemetry::render_latency_json(samples).dump(2) << '\n';
        } else {
            out << "seq  network_state    latency_s\n";
            for (const auto& s : samples) {
                char line[96];
                auto l = s.latency();
                if (l)
                    std::snprintf(line, sizeof line, "%-4llu %-16s %9.3f\n", static_cast<unsigned long long>(s.seq),
                                  s.network_state.c_str(), *l);
                else
                    std::snprintf(line, sizeof line, "%-4llu %-16s %9s\n", static_cast<unsigned long long>(s.seq),
                                  s.network_state.c_str(), "lost");
                out << line;
            }
            if (!samples.empty()) out << '\n' << telemetry::to_json(telemetry::summarize(samples)).dump(2) << '\n';
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;
        err << "error: " << e.what() << "\n\n";
        const CLI::App* where = &app;
        while (true) {
            auto subs = where->get_subcommands();
            if (subs.empty()) break;
            where = subs.front();
        }
        err << where->help();
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return status;
}

}  // namespace mqttbed::harness
