#pragma once

#include <chrono>
#include <deque>
#include <string>
#include <unordered_map>

#include "mqttbed/broker/policy.hpp"

namespace mqttbed::broker {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;

struct BanDecision {
    bool banned = false;
    std::size_t failures_in_window = 0;
    TimePoint banned_until{};
};

/// Sliding-window failure counter per network source.
class BanTable {
public:
    explicit BanTable(BanPolicy policy) : policy_(policy) {}

    bool is_banned(const std::string& source, TimePoint now);

    /// Records one failure at `now`. Reaching max_failures inside the window
    /// bans the source for ban_duration and clears its history.
    BanDecision record_failure(const std::string& source, TimePoint now);

    std::size_t tracked_sources() const { return entries_.size(); }

private:
    struct Entry {
        std::deque<TimePoint> failures;
        TimePoint banned_until{};
    };

    void prune(Entry& e, TimePoint now) const;

    BanPolicy policy_;
    std::unordered_map<std::string, Entry> entries_;
};

}  // namespace mqttbed::broker
