#include "mqttbed/broker/subscription_tree.hpp"

#include <vector>

namespace mqttbed::broker {

namespace {

std::vector<std::string_view> split_levels(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        auto slash = s.find('/');
        if (slash == std::string_view::npos) {
            out.push_back(s);
            return out;
        }
        out.push_back(s.substr(0, slash));
        s.remove_prefix(slash + 1);
    }
}

}  // namespace

void SubscriptionTree::insert(std::string_view filter, const std::string& client_id, std::uint8_t qos) {
    Node* node = &root_;
    for (auto level : split_levels(filter)) {
        auto& child = node->children[std::string(level)];
        if (!child) child = std::make_unique<Node>();
        node = child.get();
    }
    auto [it, inserted] = node->subscribers.insert_or_assign(client_id, qos);
    if (inserted) ++count_;
}

bool SubscriptionTree::erase(std::string_view filter, const std::string& client_id) {
    auto levels = split_levels(filter);
    std::vector<std::pair<Node*, std::string>> path;
    Node* node = &root_;
    for (auto level : levels) {
        auto it = node->children.find(std::string(level));
        if (it == node->children.end()) return false;
        path.emplace_back(node, std::string(level));
        node = it->second.get();
    }
    if (node->subscribers.erase(client_id) == 0) return false;
    --count_;
    // prune empty branches bottom-up
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        auto& child = it->first->children[it->second];
        if (!child->children.empty() || !child->subscribers.empty()) break;
        it->first->children.erase(it->second);
    }
    return true;
}

void SubscriptionTree::match_levels(const Node& node, std::string_view rest, bool exhausted,
                                    const Visitor& visit) {
    if (auto hash = node.children.find("#"); hash != node.children.end())
        for (const auto& [id, qos] : hash->second->subscribers) visit(id, qos);

    if (exhausted) {
        for (const auto& [id, qos] : node.subscribers) visit(id, qos);
        return;
    }

    auto slash = rest.find('/');
    std::string_view level = slash == std::string_view::npos ? rest : rest.substr(0, slash);
    std::string_view next = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
    bool last = slash == std::string_view::npos;

    if (auto exact = node.children.find(std::string(level)); exact != node.children.end())
        match_levels(*exact->second, next, last, visit);
    if (auto plus = node.children.find("+"); plus != node.children.end())
        match_levels(*plus->second, next, last, visit);
}

void SubscriptionTree::match(std::string_view topic, const Visitor& visit) const {
    match_levels(root_, topic, false, visit);
}

}  // namespace mqttbed::broker
