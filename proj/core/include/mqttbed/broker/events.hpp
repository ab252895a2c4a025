#pragma once

#include <fstream>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace mqttbed::broker {

/// One structured broker event. Kinds: connect, auth_failure, ban,
/// banned_refusal, drop, disconnect, protocol_error.
struct BrokerEvent {
    std::string kind;
    std::string client_id;
    std::string source;
    std::string detail;
};

class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void emit(const BrokerEvent& event) = 0;
};

/// Line-delimited JSON, one object per event with a wall-clock timestamp.
class JsonLinesEventLog : public EventSink {
public:
    explicit JsonLinesEventLog(const std::string& path);
    explicit JsonLinesEventLog(std::ostream& out) : out_(&out) {}

    void emit(const BrokerEvent& event) override;

private:
    std::ofstream file_;
    std::ostream* out_ = nullptr;
    std::mutex mutex_;
};

/// Keeps events in memory; used by tests and the scenario runner.
class EventRecorder : public EventSink {
public:
    void emit(const BrokerEvent& event) override;
    std::vector<BrokerEvent> snapshot() const;
    std::size_t count(const std::string& kind) const;

private:
    mutable std::mutex mutex_;
    std::vector<BrokerEvent> events_;
};

/// Fans out to several sinks.
class EventTee : public EventSink {
public:
    void add(EventSink* sink) { sinks_.push_back(sink); }
    void emit(const BrokerEvent& event) override {
        for (auto* s : sinks_) s->emit(event);
    }

private:
    std::vector<EventSink*> sinks_;
};

}  // namespace mqttbed::broker
