#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

namespace mqttbed::broker {

/// Trie of topic-filter levels; leaves hold (client_id -> granted qos).
class SubscriptionTree {
public:
    using Visitor = std::function<void(const std::string& client_id, std::uint8_t qos)>;

    void insert(std::string_view filter, const std::string& client_id, std::uint8_t qos);
    bool erase(std::string_view filter, const std::string& client_id);

    /// Visits every (client, qos) whose filter matches `topic`. A client with
    /// several matching filters is visited once per filter.
    void match(std::string_view topic, const Visitor& visit) const;

    std::size_t size() const { return count_; }

private:
    struct Node {
        std::unordered_map<std::string, std::unique_ptr<Node>> children;
        std::map<std::string, std::uint8_t> subscribers;
    };

    static void match_levels(const Node& node, std::string_view rest, bool exhausted,
                             const Visitor& visit);

    Node root_;
    std::size_t count_ = 0;
};

}  // namespace mqttbed::broker
