#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqttbed/attacks/report.hpp"
#include "mqttbed/harness/scenario.hpp"
#include "mqttbed/smarthome/edge.hpp"
#include "mqttbed/telemetry/latency.hpp"

namespace mqttbed::harness {

/// Probe state labels, in phase order.
inline constexpr const char* kStateNormal = "Normal";
inline constexpr const char* kStateDosInitiated = "DoS Initiated";
inline constexpr const char* kStateDosActive = "DoS Active";
inline constexpr const char* kStateAttack = "Attack Active";
inline constexpr const char* kStatePostAttack = "Post-Attack";

struct Verdict {
    std::string name;
    bool pass = false;
    nlohmann::json measured;
    nlohmann::json expected;
};

struct ScenarioReport {
    int schema_version = kScenarioSchemaVersion;
    std::string scenario;
    std::string status = "completed";  // or "aborted"
    std::string error;
    std::string started_at;
    std::string finished_at;
    double duration_s = 0;
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<telemetry::LatencySample> samples;
    std::optional<attacks::AttackReport> attack;
    std::optional<smarthome::EdgeCounters> edge;
    nlohmann::json devices = nlohmann::json::array();
    nlohmann::json broker = nlohmann::json::object();
    nlohmann::json measurements = nlohmann::json::object();
    std::vector<Verdict> verdicts;
    std::map<std::string, std::string> artifacts;

    /// True when the run completed and every verdict passed.
    bool passed() const;
    nlohmann::json to_json() const;
};

struct RunOptions {
    std::string output_dir;              // overrides the scenario and environment
    std::optional<std::uint64_t> seed;  // overrides the scenario seed
    std::ostream* log = nullptr;        // progress lines
};

/// Starts broker, edge, devices, probe and attack on the scenario timeline,
/// shuts them down in order (attack, devices, edge, probe, broker), evaluates
/// the scenario's expectations and writes report.json plus the latency and
/// capture artifacts into <output_dir>/<name>/.
ScenarioReport run_scenario(ScenarioConfig config, const RunOptions& options = {});

}  // namespace mqttbed::harness
