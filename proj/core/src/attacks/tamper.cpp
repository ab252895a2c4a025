#include "mqttbed/attacks/tamper.hpp"

#include <optional>

#include "mqttbed/wire/topic.hpp"

namespace mqttbed::attacks {

std::string_view tamper_status_name(TamperStatus s) {
    switch (s) {
        case TamperStatus::Tampered: return "tampered";
        case TamperStatus::NotMatched: return "not_matched";
        case TamperStatus::RuleDoesNotFit: return "rule_does_not_fit";
        case TamperStatus::NotJson: return "not_json";
    }
    return "unknown";
}

namespace {

// Just enough JSON lexing to walk the keys of one object.
class Scanner {
public:
    explicit Scanner(std::span<const std::uint8_t> s) : s_(s) {}

    std::size_t pos() const { return pos_; }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : static_cast<char>(s_[pos_]); }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r')) ++pos_;
    }

    bool consume(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    // Returns the raw bytes between the quotes.
    std::optional<std::string_view> string() {
        if (!consume('"')) return std::nullopt;
        auto start = pos_;
        while (!eof()) {
            char c = peek();
            if (c == '\\') {
                pos_ += 2;
                continue;
            }
            if (c == '"') {
                std::string_view raw(reinterpret_cast<const char*>(s_.data()) + start, pos_ - start);
                ++pos_;
                return raw;
            }
            ++pos_;
        }
        return std::nullopt;
    }

    // Skips one value of any type; returns false on malformed input.
    bool value() {
        char c = peek();
        if (c == '"') return string().has_value();
        if (c == '{' || c == '[') {
            char close = c == '{' ? '}' : ']';
            ++pos_;
            skip_ws();
            if (consume(close)) return true;
            while (true) {
                skip_ws();
                if (c == '{') {
                    if (!string()) return false;
                    skip_ws();
                    if (!consume(':')) return false;
                    skip_ws();
                }
                if (!value()) return false;
                skip_ws();
                if (consume(close)) return true;
                if (!consume(',')) return false;
            }
        }
        auto start = pos_;
        while (!eof()) {
            char d = peek();
            if (d == ',' || d == '}' || d == ']' || d == ' ' || d == '\t' || d == '\n' || d == '\r') break;
            ++pos_;
        }
        return pos_ > start;
    }

private:
    std::span<const std::uint8_t> s_;
    std::size_t pos_ = 0;
};

}  // namespace

TamperStatus rewrite_json_field(wire::Bytes& payload, std::string_view field, std::string_view replacement) {
    Scanner sc(payload);
    sc.skip_ws();
    if (!sc.consume('{')) return TamperStatus::NotJson;

    std::optional<std::pair<std::size_t, std::size_t>> span;
    std::size_t close_brace = 0;
    sc.skip_ws();
    if (sc.consume('}')) {
        close_brace = sc.pos() - 1;
    } else {
        while (true) {
            sc.skip_ws();
            auto key = sc.string();
            if (!key) return TamperStatus::NotJson;
            sc.skip_ws();
            if (!sc.consume(':')) return TamperStatus::NotJson;
            sc.skip_ws();
            auto value_start = sc.pos();
            if (!sc.value()) return TamperStatus::NotJson;
            if (*key == field && !span) span.emplace(value_start, sc.pos());
            sc.skip_ws();
            if (sc.consume('}')) {
                close_brace = sc.pos() - 1;
                break;
            }
            if (!sc.consume(',')) return TamperStatus::NotJson;
        }
    }

    if (!span) return TamperStatus::NotMatched;
    auto [begin, end] = *span;
    const std::size_t available = end - begin;
    if (replacement.size() > available) return TamperStatus::RuleDoesNotFit;

    wire::Bytes out;
    out.reserve(payload.size());
    out.insert(out.end(), payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(begin));
    out.insert(out.end(), replacement.begin(), replacement.end());
    out.insert(out.end(), payload.begin() + static_cast<std::ptrdiff_t>(end),
               payload.begin() + static_cast<std::ptrdiff_t>(close_brace));
    out.insert(out.end(), available - replacement.size(), ' ');
    out.insert(out.end(), payload.begin() + static_cast<std::ptrdiff_t>(close_brace), payload.end());
    payload = std::move(out);
    return TamperStatus::Tampered;
}

TamperOutcome tamper_rewrite(const wire::Publish& packet, const TamperRule& rule) {
    TamperOutcome out{packet, TamperStatus::NotMatched};
    if (!wire::topic_matches(rule.topic_filter, packet.topic)) return out;
    out.status = rewrite_json_field(out.packet.payload, rule.json_field, rule.replacement);
    if (out.status != TamperStatus::Tampered) out.packet = packet;
    return out;
}

}  // namespace mqttbed::attacks
