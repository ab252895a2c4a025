#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttbed/attacks/brute_force.hpp"
#include "mqttbed/attacks/eavesdrop.hpp"
#include "mqttbed/attacks/stress.hpp"
#include "mqttbed/attacks/tamper.hpp"
#include "mqttbed/attacks/timing.hpp"
#include "mqttbed/broker/config.hpp"
#include "mqttbed/smarthome/edge.hpp"
#include "mqttbed/smarthome/sensor.hpp"

namespace mqttbed::harness {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "MQTTBED_OUTPUT_DIR";

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AttackKind { None, Eavesdrop, Tamper, Dos, Brute, Timing };

std::string_view attack_kind_name(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct DeviceSpec {
    smarthome::SensorConfig sensor;
    bool explicit_seed = false;
    bool via_proxy = false;
    std::optional<wire::Credentials> credentials;
};

struct EdgeSpec {
    bool enabled = true;
    smarthome::EdgeRuleSet rules;
    std::optional<wire::Credentials> credentials;
};

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    std::string bind_host;  // source address for attacker connections
    attacks::EavesdropConfig eavesdrop;
    std::vector<attacks::TamperRule> tamper_rules;
    attacks::StressConfig stress;
    attacks::BruteForceConfig brute;
    attacks::TimingProbeConfig timing;
};

struct Timeline {
    double warmup_s = 0;
    double attack_start_s = 1;
    double attack_duration_s = 1;
    double total_s = 2;
};

struct ProbeSpec {
    bool enabled = false;
    double interval_s = 0.5;
    std::uint8_t qos = 1;
    double loss_timeout_s = 120;
    double drain_s = 10;
};

struct ScenarioConfig {
    int schema_version = kScenarioSchemaVersion;
    std::string name;
    std::string description;
    std::uint64_t seed = 42;
    broker::BrokerConfig broker;
    std::optional<smarthome::EnvelopeKey> envelope_key;
    std::vector<DeviceSpec> devices;
    EdgeSpec edge;
    AttackSpec attack;
    Timeline timeline;
    ProbeSpec probe;
    nlohmann::json expect = nlohmann::json::object();
    std::string output_dir;
    nlohmann::json source = nlohmann::json::object();  // the document as read

    /// Throws ScenarioError naming the first violated rule.
    void validate() const;
    /// Replaces the scenario seed; devices without an explicit seed follow it.
    void apply_seed(std::uint64_t seed);
};

ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);

/// Flag > config > environment > "mqttbed-out".
std::string resolve_output_dir(const ScenarioConfig& config, const std::string& override_dir = "");

}  // namespace mqttbed::harness
