#include "mqttbed/wire/topic.hpp"

#include "mqttbed/wire/codec.hpp"

namespace mqttbed::wire {

namespace {

// Splits on '/' lazily; an empty string is one empty level.
class LevelCursor {
public:
    explicit LevelCursor(std::string_view s) : rest_(s) {}

    bool done() const { return done_; }

    std::string_view next() {
        auto slash = rest_.find('/');
        if (slash == std::string_view::npos) {
            done_ = true;
            return rest_;
        }
        auto level = rest_.substr(0, slash);
        rest_.remove_prefix(slash + 1);
        return level;
    }

private:
    std::string_view rest_;
    bool done_ = false;
};

}  // namespace

bool is_valid_topic_name(std::string_view name) {
    if (name.empty() || name.size() > 65535) return false;
    if (name.find_first_of("+#") != std::string_view::npos) return false;
    return is_valid_utf8(name);
}

bool is_valid_topic_filter(std::string_view filter) {
    if (filter.empty() || filter.size() > 65535) return false;
    if (!is_valid_utf8(filter)) return false;
    LevelCursor cur(filter);
    while (!cur.done()) {
        auto level = cur.next();
        if (level.find_first_of("+#") == std::string_view::npos) continue;
        if (level.size() != 1) return false;
        if (level == "#" && !cur.done()) return false;
    }
    return true;
}

bool topic_matches(std::string_view filter, std::string_view name) {
    LevelCursor f(filter);
    LevelCursor n(name);
    while (!f.done()) {
        auto fl = f.next();
        if (fl == "#") return true;
        if (n.done()) return false;
        auto nl = n.next();
        if (fl != "+" && fl != nl) return false;
    }
    return n.done();
}

bool filter_covers(std::string_view broad, std::string_view narrow) {
    LevelCursor b(broad);
    LevelCursor n(narrow);
    for (bool first = true; !b.done(); first = false) {
        auto bl = b.next();
        if (bl == "#") return true;
        if (n.done()) return false;
        auto nl = n.next();
        // A leading '#' never matches zero levels, so "+/#" still covers it.
        if (nl == "#") return first && bl == "+" && !b.done() && b.next() == "#";
        if (bl == "+") continue;
        if (nl == "+" || nl != bl) return false;
    }
    return n.done();
}

std::optional<TopicName> TopicName::parse(std::string_view s) {
    if (!is_valid_topic_name(s)) return std::nullopt;
    return TopicName(std::string(s));
}

std::optional<TopicFilter> TopicFilter::parse(std::string_view s) {
    if (!is_valid_topic_filter(s)) return std::nullopt;
    return TopicFilter(std::string(s));
}

}  // namespace mqttbed::wire
