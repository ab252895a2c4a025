#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mqttbed::telemetry {

inline constexpr const char* kDefaultState = "Normal";

/// One probe message. Times are seconds on the probe's monotonic clock.
struct LatencySample {
    std::uint64_t seq = 0;
    std::string network_state = kDefaultState;
    double sent_at = 0;
    std::optional<double> received_at;  // nullopt: lost

    bool delivered() const { return received_at.has_value(); }
    std::optional<double> latency() const;

    bool operator==(const LatencySample&) const = default;
};

struct StateSummary {
    std::string state;
    std::size_t count = 0;
    std::size_t delivered = 0;
    std::size_t lost = 0;
    // NaN when nothing in the group was delivered
    double mean = 0;
    double median = 0;
    double p95 = 0;
    double max = 0;
};

struct LatencySummary {
    StateSummary overall;
    std::vector<StateSummary> by_state;  // first-appearance order

    const StateSummary* state(const std::string& label) const;
};

class EmptySampleSet : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Nearest-rank percentile (p in (0, 100]) of a non-empty sample.
double nearest_rank(std::vector<double> values, double p);
double median_of(std::vector<double> values);

/// Throws EmptySampleSet on empty input.
LatencySummary summarize(std::span<const LatencySample> samples);

nlohmann::json to_json(const StateSummary& s);
nlohmann::json to_json(const LatencySummary& s);

/// `seq,network_state,latency_s`, latency with 3 decimals, empty when lost.
/// Rows stay in input order.
void render_latency_csv(std::ostream& out, std::span<const LatencySample> samples);
/// Inverse of render_latency_csv: sent_at = 0, received_at = latency.
std::vector<LatencySample> parse_latency_csv(std::istream& in);

/// Full-precision twin with the summary block.
nlohmann::json render_latency_json(std::span<const LatencySample> samples);
std::vector<LatencySample> parse_latency_json(const nlohmann::json& j);

}  // namespace mqttbed::telemetry
