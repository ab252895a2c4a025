#include "mqttbed/harness/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace mqttbed::harness {

using nlohmann::json;

std::string_view attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "none";
        case AttackKind::Eavesdrop: return "eavesdrop";
        case AttackKind::Tamper: return "tamper";
        case AttackKind::Dos: return "dos";
        case AttackKind::Brute: return "brute";
        case AttackKind::Timing: return "timing";
    }
    return "none";
}

AttackKind parse_attack_kind(const std::string& s) {
    for (auto k : {AttackKind::None, AttackKind::Eavesdrop, AttackKind::Tamper, AttackKind::Dos, AttackKind::Brute,
                   AttackKind::Timing})
        if (attack_kind_name(k) == s) return k;
    throw ScenarioError("unknown attack kind '" + s + "'");
}

namespace {

std::optional<wire::Credentials> credentials_from(const json& j) {
    if (!j.contains("username")) return std::nullopt;
    wire::Credentials c;
    c.username = j.at("username").get<std::string>();
    if (j.contains("password")) c.password = wire::to_bytes(j.at("password").get<std::string>());
    return c;
}

smarthome::SensorKind parse_kind(const std::string& s) {
    if (s == "temperature") return smarthome::SensorKind::Temperature;
    if (s == "door") return smarthome::SensorKind::Door;
    throw ScenarioError("unknown device kind '" + s + "'");
}

DeviceSpec parse_device(const json& j, std::size_t index, std::uint64_t scenario_seed) {
    DeviceSpec d;
    auto& s = d.sensor;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.name = j.value("name", std::string(smarthome::sensor_kind_name(s.kind)) + "-" + std::to_string(index));
    s.topic = j.value("topic", s.kind == smarthome::SensorKind::Temperature ? std::string("home/livingroom/temperature")
                                                                             : std::string("home/hall/door"));
    s.publish_interval_s = j.value("publish_interval_s", 1.0);
    s.qos = j.value("qos", std::uint8_t{0});
    d.explicit_seed = j.contains("seed");
    s.seed = d.explicit_seed ? j.at("seed").get<std::uint64_t>() : scenario_seed + index;
    if (j.contains("temperature")) {
        const auto& t = j.at("temperature");
        s.temperature.base = t.value("base", s.temperature.base);
        s.temperature.amplitude = t.value("amplitude", s.temperature.amplitude);
        s.temperature.noise = t.value("noise", s.temperature.noise);
        s.temperature.period_ticks = t.value("period_ticks", s.temperature.period_ticks);
    }
    if (j.contains("door")) {
        const auto& t = j.at("door");
        s.door.toggle_probability = t.value("toggle_probability", s.door.toggle_probability);
        s.door.initially_open = t.value("initially_open", s.door.initially_open);
    }
    d.via_proxy = j.value("via_proxy", false);
    d.credentials = credentials_from(j);
    return d;
}

void parse_attack(const json& j, AttackSpec& a) {
    a.kind = parse_attack_kind(j.value("kind", std::string("none")));
    a.bind_host = j.value("bind_host", std::string());
    switch (a.kind) {
        case AttackKind::None: break;
        case AttackKind::Eavesdrop:
            a.eavesdrop.filter = j.value("filter", a.eavesdrop.filter);
            a.eavesdrop.client_id = j.value("client_id", a.eavesdrop.client_id);
            a.eavesdrop.credentials = credentials_from(j);
            break;
        case AttackKind::Tamper:
            for (const auto& r : j.at("rules")) {
                attacks::TamperRule rule;
                rule.topic_filter = r.value("topic_filter", rule.topic_filter);
                rule.json_field = r.value("json_field", rule.json_field);
                rule.replacement = r.value("replacement", rule.replacement);
                a.tamper_rules.push_back(std::move(rule));
            }
            break;
        case AttackKind::Dos: {
            auto& s = a.stress;
            s.client_count = j.value("client_count", s.client_count);
            s.messages_per_client = j.value("messages_per_client", s.messages_per_client);
            s.qos = j.value("qos", s.qos);
            s.payload_size = j.value("payload_size", s.payload_size);
            s.topic = j.value("topic", s.topic);
            s.connect_rate = j.value("connect_rate", s.connect_rate);
            s.inflight_window = j.value("inflight_window", s.inflight_window);
            s.ack_timeout_s = j.value("ack_timeout_s", s.ack_timeout_s);
            break;
        }
        case AttackKind::Brute: {
            auto& b = a.brute;
            b.alphabet = j.value("alphabet", b.alphabet);
            b.min_length = j.value("min_length", b.min_length);
            b.max_length = j.value("max_length", b.max_length);
            b.username = j.at("username").get<std::string>();
            b.max_rate = j.value("max_rate", b.max_rate);
            b.ban_streak = j.value("ban_streak", b.ban_streak);
            b.ban_backoff_s = j.value("ban_backoff_s", b.ban_backoff_s);
            break;
        }
        case AttackKind::Timing: {
            auto& t = a.timing;
            t.valid_username = j.at("valid_username").get<std::string>();
            t.invalid_username = j.value("invalid_username", std::string());
            t.samples_per_class = j.value("samples_per_class", t.samples_per_class);
            t.alpha = j.value("alpha", t.alpha);
            break;
        }
    }
}

}  // namespace

ScenarioConfig parse_scenario(const json& j) {
    ScenarioConfig c;
    try {
        if (!j.is_object()) throw ScenarioError("scenario must be a JSON object");
        c.source = j;
        c.schema_version = j.at("schema_version").get<int>();
        if (c.schema_version != kScenarioSchemaVersion)
            throw ScenarioError("unsupported schema_version " + std::to_string(c.schema_version));
        c.name = j.at("name").get<std::string>();
        c.description = j.value("description", std::string());
        c.seed = j.value("seed", c.seed);
        c.broker = broker::broker_config_from_json(j.value("broker", json::object()));
        if (j.contains("envelope_key")) c.envelope_key = smarthome::key_from_hex(j.at("envelope_key").get<std::string>());
        std::size_t index = 0;
        for (const auto& d : j.value("devices", json::array())) c.devices.push_back(parse_device(d, index++, c.seed));

        const auto edge = j.value("edge", json::object());
        c.edge.enabled = edge.value("enabled", true);
        c.edge.rules.ac_threshold = edge.value("ac_threshold", c.edge.rules.ac_threshold);
        c.edge.rules.ac_command_topic = edge.value("ac_command_topic", c.edge.rules.ac_command_topic);
        c.edge.rules.light_command_topic = edge.value("light_command_topic", c.edge.rules.light_command_topic);
        c.edge.rules.sensor_filters = edge.value("sensor_filters", c.edge.rules.sensor_filters);
        c.edge.rules.envelope_key = c.envelope_key;
        c.edge.credentials = credentials_from(edge);

        parse_attack(j.value("attack", json::object()), c.attack);

        const auto& t = j.at("timeline");
        c.timeline.warmup_s = t.at("warmup_s").get<double>();
        c.timeline.attack_start_s = t.at("attack_start_s").get<double>();
        c.timeline.attack_duration_s = t.at("attack_duration_s").get<double>();
        c.timeline.total_s = t.at("total_s").get<double>();

        const auto probe = j.value("probe", json::object());
        c.probe.enabled = probe.value("enabled", false);
        c.probe.interval_s = probe.value("interval_s", c.probe.interval_s);
        c.probe.qos = probe.value("qos", c.probe.qos);
        c.probe.loss_timeout_s = probe.value("loss_timeout_s", c.probe.loss_timeout_s);
        c.probe.drain_s = probe.value("drain_s", c.probe.drain_s);

        c.expect = j.value("expect", json::object());
        c.output_dir = j.value("output_dir", std::string());
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("scenario: ") + e.what());
    } catch (const broker::ConfigError& e) {
        throw ScenarioError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ScenarioError(path + ": " + e.what());
    }
    return parse_scenario(j);
}

void ScenarioConfig::validate() const {
    if (name.empty()) throw ScenarioError("scenario name must not be empty");
    const auto& t = timeline;
    for (double v : {t.warmup_s, t.attack_start_s, t.attack_duration_s, t.total_s})
        if (!std::isfinite(v) || v < 0) throw ScenarioError("timeline values must be finite and non-negative");
    if (!(t.warmup_s < t.attack_start_s))
        throw ScenarioError("timeline: warmup_s must be before attack_start_s");
    if (!(t.attack_duration_s > 0)) throw ScenarioError("timeline: attack_duration_s must be positive");
    if (t.attack_start_s + t.attack_duration_s > t.total_s)
        throw ScenarioError("timeline: attack_start_s + attack_duration_s exceeds total_s");

    std::set<std::string> names;
    for (const auto& d : devices) {
        try {
            d.sensor.validate();
        } catch (const std::invalid_argument& e) {
            throw ScenarioError("device " + d.sensor.name + ": " + e.what());
        }
        if (!names.insert(d.sensor.name).second) throw ScenarioError("duplicate device name " + d.sensor.name);
        if (d.via_proxy && attack.kind != AttackKind::Tamper)
            throw ScenarioError("device " + d.sensor.name + " routes via a proxy but the attack is not tamper");
    }
    if (probe.enabled && !(probe.interval_s > 0)) throw ScenarioError("probe interval_s must be positive");
    if (probe.qos > 2) throw ScenarioError("probe qos must be 0, 1 or 2");
    if (!std::isfinite(edge.rules.ac_threshold)) throw ScenarioError("edge ac_threshold must be finite");

    try {
        switch (attack.kind) {
            case AttackKind::Tamper:
                if (attack.tamper_rules.empty()) throw ScenarioError("tamper attack needs at least one rule");
                break;
            case AttackKind::Dos: attack.stress.validate(); break;
            case AttackKind::Brute: attack.brute.validate(); break;
            case AttackKind::Timing:
                if (attack.timing.samples_per_class < attacks::kMinSamplesPerClass)
                    throw ScenarioError("timing attack needs at least 30 samples per class");
                break;
            default: break;
        }
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("attack: ") + e.what());
    }
}

void ScenarioConfig::apply_seed(std::uint64_t s) {
    seed = s;
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (!devices[i].explicit_seed) devices[i].sensor.seed = s + i;
}

std::string resolve_output_dir(const ScenarioConfig& config, const std::string& override_dir) {
    if (!override_dir.empty()) return override_dir;
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return "mqttbed-out";
}

}  // namespace mqttbed::harness
