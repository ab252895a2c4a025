#include "mqttbed/broker/events.hpp"

#include <chrono>
#include <nlohmann/json.hpp>

#include "mqttbed/util/time.hpp"

namespace mqttbed::broker {

JsonLinesEventLog::JsonLinesEventLog(const std::string& path) : file_(path, std::ios::app) {
    if (!file_) throw std::runtime_error("cannot open event log " + path);
    out_ = &file_;
}

void JsonLinesEventLog::emit(const BrokerEvent& event) {
    nlohmann::json j{{"ts", util::iso8601_now()},
                     {"event", event.kind},
                     {"client_id", event.client_id},
                     {"source", event.source},
                     {"detail", event.detail}};
    std::lock_guard lock(mutex_);
    *out_ << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    out_->flush();
}

void EventRecorder::emit(const BrokerEvent& event) {
    std::lock_guard lock(mutex_);
    events_.push_back(event);
}

std::vector<BrokerEvent> EventRecorder::snapshot() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::size_t EventRecorder::count(const std::string& kind) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& e : events_) n += e.kind == kind;
    return n;
}

}  // namespace mqttbed::broker
