#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mqttbed::wire {

// Topic names and filters are '/'-separated levels. Filters may use '+' for a
// whole single level and '#' as the final level only.

bool is_valid_topic_name(std::string_view name);
bool is_valid_topic_filter(std::string_view filter);

/// True iff `name` is in the match set of `filter`. Both must already be valid.
bool topic_matches(std::string_view filter, std::string_view name);

/// True iff every topic matched by `narrow` is also matched by `broad`.
/// Decided structurally, level by level.
bool filter_covers(std::string_view broad, std::string_view narrow);

class TopicName {
public:
    static std::optional<TopicName> parse(std::string_view s);
    const std::string& str() const noexcept { return value_; }
    bool operator==(const TopicName&) const = default;

private:
    explicit TopicName(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

class TopicFilter {
public:
    static std::optional<TopicFilter> parse(std::string_view s);
    const std::string& str() const noexcept { return value_; }
    bool matches(const TopicName& name) const { return topic_matches(value_, name.str()); }
    bool operator==(const TopicFilter&) const = default;

private:
    explicit TopicFilter(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

}  // namespace mqttbed::wire
