#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "mqttbed/attacks/report.hpp"
#include "mqttbed/net/client.hpp"

namespace mqttbed::smarthome {
class StopToken;
}

namespace mqttbed::attacks {

/// Every string over `alphabet` with length in [min_length, max_length],
/// shortest first, lexicographic in alphabet order within a length.
class CandidateSpace {
public:
    CandidateSpace(std::string alphabet, std::size_t min_length, std::size_t max_length);

    std::uint64_t size() const { return size_; }
    /// Zero-based; throws std::out_of_range past the end.
    std::string at(std::uint64_t index) const;
    std::optional<std::uint64_t> index_of(const std::string& candidate) const;
    const std::string& alphabet() const { return alphabet_; }

private:
    std::string alphabet_;
    std::size_t min_length_;
    std::size_t max_length_;
    std::uint64_t size_ = 0;
};

/// Saturating |alphabet|^length as a double (no overflow for long lengths).
double space_of_length(std::size_t alphabet_size, std::size_t length);

struct BruteForceConfig {
    std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::size_t min_length = 1;
    std::size_t max_length = 4;
    std::string username;
    double max_rate = 0;           // CONNECT attempts per second, 0 = unlimited
    std::uint64_t start_index = 0;  // resume cursor from an earlier run
    double time_budget_s = 0;       // 0 = run until the space is exhausted
    std::size_t ban_streak = 3;     // consecutive CONNACK 5 that count as a ban
    double ban_backoff_s = 1.0;     // wait before retrying a refused candidate
    std::size_t network_retries = 3;
    std::string client_id_prefix = "bf";
    std::string bind_host;
    net::Millis connect_timeout{5000};

    void validate() const;
};

struct BruteForceResult {
    std::optional<std::string> found;
    std::uint64_t attempts = 0;  // candidates the broker evaluated (CONNACK 0 or 4)
    std::uint64_t refused = 0;   // CONNACK 5 answers
    std::uint64_t network_errors = 0;
    double elapsed_s = 0;
    double rate = 0;  // attempts / elapsed_s
    double rate_before_ban = 0;
    double degradation_factor = 1;
    std::size_t projected_length = 0;
    double projected_seconds = 0;  // |alphabet|^projected_length / rate
    std::string outcome;  // found | exhausted | rate-limited | budget-exhausted | network-error | stopped
    std::uint64_t resume_cursor = 0;
    AttackReport report;
};

/// One TCP connection and CONNECT per candidate, in CandidateSpace order,
/// stopping at the first CONNACK 0. A refused candidate is retried after a
/// backoff rather than skipped, so bans slow the search instead of
/// corrupting it.
BruteForceResult brute_force(const BruteForceConfig& config, const net::Endpoint& broker,
                             smarthome::StopToken* stop = nullptr);

}  // namespace mqttbed::attacks
