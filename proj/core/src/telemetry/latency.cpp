#include "mqttbed/telemetry/latency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mqttbed/util/csv.hpp"

namespace mqttbed::telemetry {

std::optional<double> LatencySample::latency() const {
    if (!received_at) return std::nullopt;
    return *received_at - sent_at;
}

const StateSummary* LatencySummary::state(const std::string& label) const {
    for (const auto& s : by_state)
        if (s.state == label) return &s;
    return nullptr;
}

double nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) throw EmptySampleSet("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw EmptySampleSet("median of an empty sample");
    std::sort(values.begin(), values.end());
    auto n = values.size();
    return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

namespace {

StateSummary summarize_group(const std::string& label, const std::vector<const LatencySample*>& group) {
    StateSummary s;
    s.state = label;
    s.count = group.size();
    std::vector<double> lat;
    for (const auto* g : group)
        if (auto l = g->latency()) lat.push_back(*l);
    s.delivered = lat.size();
    s.lost = s.count - s.delivered;
    if (lat.empty()) {
        s.mean = s.median = s.p95 = s.max = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.mean = std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(lat.size());
    s.median = median_of(lat);
    s.p95 = nearest_rank(lat, 95);
    s.max = *std::max_element(lat.begin(), lat.end());
    return s;
}

std::string label_or_default(const std::string& s) { return s.empty() ? kDefaultState : s; }

}  // namespace

LatencySummary summarize(std::span<const LatencySample> samples) {
    if (samples.empty()) throw EmptySampleSet("no latency samples to summarize");
    LatencySummary out;
    std::vector<std::string> order;
    std::vector<std::vector<const LatencySample*>> groups;
    std::vector<const LatencySample*> all;
    for (const auto& s : samples) {
        all.push_back(&s);
        auto label = label_or_default(s.network_state);
        auto it = std::find(order.begin(), order.end(), label);
        if (it == order.end()) {
            order.push_back(label);
            groups.emplace_back();
            it = order.end() - 1;
        }
        groups[static_cast<std::size_t>(it - order.begin())].push_back(&s);
    }
    out.overall = summarize_group("all", all);
    for (std::size_t i = 0; i < order.size(); ++i) out.by_state.push_back(summarize_group(order[i], groups[i]));
    return out;
}

nlohmann::json to_json(const StateSummary& s) {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return {{"state", s.state},   {"count", s.count},       {"delivered", s.delivered},
            {"lost", s.lost},     {"mean_s", num(s.mean)},  {"median_s", num(s.median)},
            {"p95_s", num(s.p95)}, {"max_s", num(s.max)}};
}

nlohmann::json to_json(const LatencySummary& s) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& st : s.by_state) states.push_back(to_json(st));
    return {{"overall", to_json(s.overall)}, {"by_state", states}};
}

void render_latency_csv(std::ostream& out, std::span<const LatencySample> samples) {
    util::write_csv_row(out, {"seq", "network_state", "latency_s"});
    for (const auto& s : samples) {
        std::string latency;
        if (auto l = s.latency()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f", *l);
            latency = buf;
        }
        util::write_csv_row(out, {std::to_string(s.seq), label_or_default(s.network_state), latency});
    }
}

std::vector<LatencySample> parse_latency_csv(std::istream& in) {
    auto table = util::parse_csv(in);
    if (table.empty() || table[0] != std::vector<std::string>{"seq", "network_state", "latency_s"})
        throw std::runtime_error("latency CSV: missing header");
    std::vector<LatencySample> out;
    for (std::size_t i = 1; i < table.size(); ++i) {
        const auto& row = table[i];
        if (row.size() != 3) throw std::runtime_error("latency CSV: malformed row " + std::to_string(i));
        LatencySample s;
        s.seq = std::stoull(row[0]);
        s.network_state = label_or_default(row[1]);
        if (!row[2].empty()) s.received_at = std::stod(row[2]);
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::json render_latency_json(std::span<const LatencySample> samples) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : samples) {
        rows.push_back({{"seq", s.seq},
                        {"network_state", label_or_default(s.network_state)},
                        {"sent_at", s.sent_at},
                        {"received_at", s.received_at ? nlohmann::json(*s.received_at) : nlohmann::json(nullptr)},
                        {"latency_s", s.latency() ? nlohmann::json(*s.latency()) : nlohmann::json(nullptr)}});
    }
    nlohmann::json j{{"samples", rows}};
    if (!samples.empty()) j["summary"] = to_json(summarize(samples));
    return j;
}

std::vector<LatencySample> parse_latency_json(const nlohmann::json& j) {
    std::vector<LatencySample> out;
    for (const auto& r : j.at("samples")) {
        LatencySample s;
        s.seq = r.at("seq").get<std::uint64_t>();
        s.network_state = label_or_default(r.value("network_state", std::string(kDefaultState)));
        s.sent_at = r.at("sent_at").get<double>();
        if (!r.at("received_at").is_null()) s.received_at = r.at("received_at").get<double>();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace mqttbed::telemetry
