#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mqttbed/attacks/report.hpp"
#include "mqttbed/net/client.hpp"

namespace mqttbed::attacks {

inline constexpr std::size_t kMinSamplesPerClass = 30;

class InsufficientSamples : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ClassStats {
    std::size_t n = 0;
    double mean = 0;
    double stddev = 0;  // sample (n - 1) standard deviation
};

ClassStats describe(std::span<const double> samples);

struct TwoSampleResult {
    ClassStats a;
    ClassStats b;
    double t_statistic = 0;
    double degrees_of_freedom = 0;
    double p_value = 1;
    double alpha = 0.01;
    bool significant = false;
};

/// Welch's unequal-variance t-test, two-sided. Throws InsufficientSamples
/// below kMinSamplesPerClass in either class.
TwoSampleResult welch_test(std::span<const double> a, std::span<const double> b, double alpha = 0.01);

struct TimingProbeConfig {
    net::Endpoint broker;
    std::string valid_username;
    std::string invalid_username;  // empty: derived, same length as the valid one
    std::string wrong_password = "wrong-password";
    std::size_t samples_per_class = 500;
    std::size_t warmup_per_class = 20;
    double alpha = 0.01;
    std::uint64_t seed = 7;  // order of the interleaved pairs
    std::string bind_host;
};

struct TimingProbeResult {
    std::vector<double> valid_user_s;
    std::vector<double> unknown_user_s;
    TwoSampleResult test;
    AttackReport report;
};

/// Measures CONNECT -> CONNACK latency for (valid user, wrong password)
/// against (unknown user), interleaving the classes in a seeded random
/// order so drift affects both equally.
TimingProbeResult timing_probe(const TimingProbeConfig& config);

}  // namespace mqttbed::attacks
