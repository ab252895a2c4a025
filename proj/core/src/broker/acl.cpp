#include "mqttbed/broker/acl.hpp"

#include "mqttbed/wire/topic.hpp"

namespace mqttbed::broker {

bool authorize(const SecurityPolicy& policy, const Principal& principal, Action action,
               std::string_view topic_or_filter) {
    if (!policy.enforce_acl) return true;
    for (const auto& entry : policy.acl) {
        if (entry.principal != principal) continue;
        if (action == Action::Publish && entry.allow_publish &&
            wire::topic_matches(entry.filter, topic_or_filter))
            return true;
        if (action == Action::Subscribe && entry.allow_subscribe &&
            wire::filter_covers(entry.filter, topic_or_filter))
            return true;
    }
    return false;
}

}  // namespace mqttbed::broker
