#include "mqttbed/broker/config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "mqttbed/net/client.hpp"

namespace mqttbed::broker {

namespace {

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("line " + std::to_string(line) + ": expected true/false, got '" + v + "'");
}

std::size_t parse_size(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        long long n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0) throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": expected a non-negative integer, got '" + v + "'");
    }
}

Principal parse_principal(const std::string& s) {
    if (s == "@anonymous") return std::nullopt;
    return s;
}

ListenAddress parse_listen(const std::string& s) {
    auto ep = net::Endpoint::parse(s);
    return ListenAddress{ep.host, ep.port};
}

}  // namespace

BrokerConfig parse_broker_config(std::istream& in) {
    BrokerConfig cfg;
    std::vector<std::pair<std::string, std::string>> users;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto first = raw.find_first_not_of(" \t"); first == std::string::npos || raw[first] == '#') continue;
        std::istringstream ls(raw);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        const auto& key = tok[0];
        auto want = [&](std::size_t n) {
            if (tok.size() != n + 1)
                throw ConfigError("line " + std::to_string(line_no) + ": '" + key + "' takes " +
                                  std::to_string(n) + " argument(s)");
        };
        if (key == "listen") {
            want(1);
            cfg.listen = parse_listen(tok[1]);
        } else if (key == "allow_anonymous") {
            want(1);
            cfg.policy.allow_anonymous = parse_bool(tok[1], line_no);
        } else if (key == "user") {
            want(2);
            users.emplace_back(tok[1], tok[2]);
        } else if (key == "enforce_acl") {
            want(1);
            cfg.policy.enforce_acl = parse_bool(tok[1], line_no);
        } else if (key == "acl") {
            want(3);
            AclEntry e;
            e.principal = parse_principal(tok[1]);
            e.filter = tok[2];
            const auto& mode = tok[3];
            e.allow_publish = mode == "publish" || mode == "readwrite";
            e.allow_subscribe = mode == "subscribe" || mode == "readwrite";
            if (!e.allow_publish && !e.allow_subscribe)
                throw ConfigError("line " + std::to_string(line_no) + ": acl mode must be publish, subscribe or readwrite");
            cfg.policy.acl.push_back(std::move(e));
        } else if (key == "max_packet_size") {
            want(1);
            cfg.policy.max_packet_size = parse_size(tok[1], line_no);
        } else if (key == "message_size_limit") {
            want(1);
            cfg.policy.message_size_limit = parse_size(tok[1], line_no);
        } else if (key == "max_inflight_bytes") {
            want(1);
            cfg.policy.max_inflight_bytes = parse_size(tok[1], line_no);
        } else if (key == "ban_policy") {
            if (tok.size() == 2 && tok[1] == "off") {
                cfg.policy.ban_policy.reset();
            } else {
                want(3);
                BanPolicy b;
                b.max_failures = static_cast<std::uint32_t>(parse_size(tok[1], line_no));
                b.window = std::chrono::seconds(parse_size(tok[2], line_no));
                b.ban_duration = std::chrono::seconds(parse_size(tok[3], line_no));
                cfg.policy.ban_policy = b;
            }
        } else if (key == "password_policy") {
            if (tok.size() == 2 && tok[1] == "off") {
                cfg.policy.password_policy.reset();
            } else {
                want(2);
                PasswordPolicy p;
                p.min_length = parse_size(tok[1], line_no);
                p.require_classes = static_cast<int>(parse_size(tok[2], line_no));
                cfg.policy.password_policy = p;
            }
        } else if (key == "event_log") {
            want(1);
            cfg.event_log = tok[1];
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown directive '" + key + "'");
        }
    }
    try {
        for (const auto& [u, p] : users) cfg.policy.add_user(u, p);
        cfg.policy.validate();
    } catch (const PolicyError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

BrokerConfig load_broker_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open broker config " + path);
    return parse_broker_config(in);
}

BrokerConfig broker_config_from_json(const nlohmann::json& j) {
    BrokerConfig cfg;
    try {
        if (j.contains("listen")) cfg.listen = parse_listen(j.at("listen").get<std::string>());
        cfg.policy.allow_anonymous = j.value("allow_anonymous", true);
        cfg.policy.enforce_acl = j.value("enforce_acl", false);
        cfg.policy.max_packet_size = j.value("max_packet_size", std::size_t{0});
        cfg.policy.message_size_limit = j.value("message_size_limit", std::size_t{0});
        cfg.policy.max_inflight_bytes = j.value("max_inflight_bytes", std::size_t{0});
        if (j.contains("ban_policy") && !j.at("ban_policy").is_null()) {
            const auto& b = j.at("ban_policy");
            cfg.policy.ban_policy = BanPolicy{b.at("max_failures").get<std::uint32_t>(),
                                              std::chrono::seconds(b.at("window_s").get<long>()),
                                              std::chrono::seconds(b.at("ban_duration_s").get<long>())};
        }
        if (j.contains("password_policy") && !j.at("password_policy").is_null()) {
            const auto& p = j.at("password_policy");
            cfg.policy.password_policy =
                PasswordPolicy{p.at("min_length").get<std::size_t>(), p.at("require_classes").get<int>()};
        }
        for (const auto& a : j.value("acl", nlohmann::json::array())) {
            AclEntry e;
            if (!a.at("principal").is_null()) e.principal = parse_principal(a.at("principal").get<std::string>());
            e.filter = a.at("filter").get<std::string>();
            e.allow_publish = a.value("publish", false);
            e.allow_subscribe = a.value("subscribe", false);
            cfg.policy.acl.push_back(std::move(e));
        }
        if (j.contains("event_log")) cfg.event_log = j.at("event_log").get<std::string>();
        for (const auto& u : j.value("users", nlohmann::json::array()))
            cfg.policy.add_user(u.at("username").get<std::string>(), u.at("password").get<std::string>());
        cfg.policy.validate();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("broker section: ") + e.what());
    } catch (const PolicyError& e) {
        throw ConfigError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

}  // namespace mqttbed::broker
