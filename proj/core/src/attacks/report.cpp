#include "mqttbed/attacks/report.hpp"

#include <fstream>
#include <stdexcept>

#include "mqttbed/util/time.hpp"

namespace mqttbed::attacks {

nlohmann::json AttackReport::to_json() const {
    return nlohmann::json{{"kind", kind},         {"started_at", started_at}, {"finished_at", finished_at},
                          {"duration_s", duration_s}, {"outcome", outcome},     {"counters", counters},
                          {"errors", errors},     {"details", details}};
}

AttackReport AttackReport::from_json(const nlohmann::json& j) {
    AttackReport r;
    r.kind = j.at("kind").get<std::string>();
    r.started_at = j.value("started_at", "");
    r.finished_at = j.value("finished_at", "");
    r.duration_s = j.value("duration_s", 0.0);
    r.outcome = j.value("outcome", "");
    r.counters = j.value("counters", std::map<std::string, std::uint64_t>{});
    r.errors = j.value("errors", std::map<std::string, std::uint64_t>{});
    r.details = j.value("details", nlohmann::json::object());
    return r;
}

void AttackReport::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report " + path);
    out << to_json().dump(2) << '\n';
}

ReportClock::ReportClock(AttackReport& report) : report_(report), start_(std::chrono::steady_clock::now()) {
    report_.started_at = util::iso8601_now();
}

void ReportClock::finish() {
    report_.finished_at = util::iso8601_now();
    report_.duration_s = elapsed_s();
}

double ReportClock::elapsed_s() const {
    return util::seconds_between(start_, std::chrono::steady_clock::now());
}

}  // namespace mqttbed::attacks
