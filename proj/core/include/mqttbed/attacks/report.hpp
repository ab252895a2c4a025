#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace mqttbed::attacks {

/// Summary every attack tool emits.
struct AttackReport {
    std::string kind;
    std::string started_at;
    std::string finished_at;
    double duration_s = 0;
    std::string outcome;
    std::map<std::string, std::uint64_t> counters;
    std::map<std::string, std::uint64_t> errors;
    nlohmann::json details = nlohmann::json::object();

    nlohmann::json to_json() const;
    static AttackReport from_json(const nlohmann::json& j);
    void write(const std::string& path) const;
};

/// Stamps start/finish times around a tool run.
class ReportClock {
public:
    explicit ReportClock(AttackReport& report);
    void finish();
    double elapsed_s() const;

private:
    AttackReport& report_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace mqttbed::attacks
