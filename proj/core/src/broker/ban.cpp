#include "mqttbed/broker/ban.hpp"

namespace mqttbed::broker {

void BanTable::prune(Entry& e, TimePoint now) const {
    while (!e.failures.empty() && now - e.failures.front() >= policy_.window) e.failures.pop_front();
}

bool BanTable::is_banned(const std::string& source, TimePoint now) {
    auto it = entries_.find(source);
    if (it == entries_.end()) return false;
    auto& e = it->second;
    if (now < e.banned_until) return true;
    prune(e, now);
    if (e.failures.empty()) entries_.erase(it);
    return false;
}

BanDecision BanTable::record_failure(const std::string& source, TimePoint now) {
    auto& e = entries_[source];
    prune(e, now);
    e.failures.push_back(now);
    BanDecision d;
    d.failures_in_window = e.failures.size();
    if (e.failures.size() >= policy_.max_failures) {
        e.banned_until = now + policy_.ban_duration;
        e.failures.clear();
        d.banned = true;
        d.banned_until = e.banned_until;
    }
    return d;
}

}  // namespace mqttbed::broker
