#pragma once

#include <string_view>

#include "mqttbed/broker/policy.hpp"

namespace mqttbed::broker {

enum class Action { Publish, Subscribe };

/// Publish: some entry's filter matches the topic. Subscribe: the requested
/// filter's match set is contained in some entry's filter. Always true when
/// ACL enforcement is off.
bool authorize(const SecurityPolicy& policy, const Principal& principal, Action action,
               std::string_view topic_or_filter);

}  // namespace mqttbed::broker
