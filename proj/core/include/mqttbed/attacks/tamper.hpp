#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "mqttbed/wire/packet.hpp"

namespace mqttbed::attacks {

struct TamperRule {
    std::string topic_filter = "#";
    std::string json_field = "temperature";
    /// Raw JSON value text, e.g. 999.9 or "hot" (quotes included).
    std::string replacement = "999.9";
};

enum class TamperStatus {
    Tampered,
    NotMatched,      // topic outside the filter, or field absent
    RuleDoesNotFit,  // replacement longer than the original value text
    NotJson,         // payload does not start with a JSON object
};

std::string_view tamper_status_name(TamperStatus s);

struct TamperOutcome {
    wire::Publish packet;
    TamperStatus status = TamperStatus::NotMatched;
};

/// Replaces the value of `field` in the payload's leading JSON object with
/// `replacement`, padding with spaces before the object's closing brace so the
/// payload length is unchanged. Bytes after the object (e.g. a MAC tag) are
/// kept as they are.
TamperStatus rewrite_json_field(wire::Bytes& payload, std::string_view field, std::string_view replacement);

/// Length-preserving PUBLISH rewrite: len(encode(out)) == len(encode(in)).
/// Non-matching or non-fitting packets come back unchanged.
TamperOutcome tamper_rewrite(const wire::Publish& packet, const TamperRule& rule);

}  // namespace mqttbed::attacks
