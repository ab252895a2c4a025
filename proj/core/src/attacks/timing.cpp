#include "mqttbed/attacks/timing.hpp"

#include <array>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mqttbed/wire/codec.hpp"

namespace mqttbed::attacks {

ClassStats describe(std::span<const double> samples) {
    ClassStats s;
    s.n = samples.size();
    if (s.n == 0) return s;
    s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0;
        for (double x : samples) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

TwoSampleResult welch_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() < kMinSamplesPerClass || b.size() < kMinSamplesPerClass)
        throw InsufficientSamples("need at least " + std::to_string(kMinSamplesPerClass) +
                                  " samples per class, got " + std::to_string(a.size()) + " and " +
                                  std::to_string(b.size()));
    TwoSampleResult r;
    r.alpha = alpha;
    r.a = describe(a);
    r.b = describe(b);
    const double va = r.a.stddev * r.a.stddev / static_cast<double>(r.a.n);
    const double vb = r.b.stddev * r.b.stddev / static_cast<double>(r.b.n);
    const double se2 = va + vb;
    const double diff = r.a.mean - r.b.mean;
    if (se2 == 0) {
        r.t_statistic = diff == 0 ? 0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        r.degrees_of_freedom = static_cast<double>(r.a.n + r.b.n - 2);
        r.p_value = diff == 0 ? 1 : 0;
    } else {
        r.t_statistic = diff / std::sqrt(se2);
        r.degrees_of_freedom =
            se2 * se2 / (va * va / static_cast<double>(r.a.n - 1) + vb * vb / static_cast<double>(r.b.n - 1));
        boost::math::students_t dist(r.degrees_of_freedom);
        r.p_value = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic)));
    }
    r.significant = r.p_value < alpha;
    return r;
}

namespace {

double measure_connect(const TimingProbeConfig& cfg, const std::string& username, std::uint64_t n) {
    auto stream = net::TcpStream::connect(cfg.broker, net::Millis(5000), cfg.bind_host);
    wire::Connect c;
    c.client_id = "timing-" + std::to_string(n);
    c.credentials = wire::Credentials{username, wire::to_bytes(cfg.wrong_password)};
    auto bytes = wire::encode_packet(c);
    wire::Bytes in;
    std::array<std::uint8_t, 64> buf{};
    auto t0 = std::chrono::steady_clock::now();
    stream.send_all(bytes);
    while (true) {
        auto got = stream.recv_some(buf, net::Millis(5000));
        if (!got) throw net::NetworkError("timed out waiting for CONNACK");
        if (*got == 0) throw net::NetworkError("connection closed before CONNACK");
        in.insert(in.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(*got));
        if (auto d = wire::decode_packet(in)) {
            auto t1 = std::chrono::steady_clock::now();
            auto* ack = std::get_if<wire::Connack>(&d->packet);
            if (!ack) throw net::NetworkError("expected CONNACK");
            if (ack->return_code == 0) throw std::runtime_error("probe credentials were accepted");
            return std::chrono::duration<double>(t1 - t0).count();
        }
    }
}

}  // namespace

TimingProbeResult timing_probe(const TimingProbeConfig& config) {
    if (config.valid_username.empty()) throw std::invalid_argument("valid_username must not be empty");
    if (config.samples_per_class < kMinSamplesPerClass)
        throw InsufficientSamples("samples_per_class below " + std::to_string(kMinSamplesPerClass));
    auto invalid = config.invalid_username;
    if (invalid.empty()) {
        invalid = config.valid_username;
        for (auto& ch : invalid) ch = ch == 'z' ? 'q' : 'z';
    }
    if (invalid == config.valid_username) throw std::invalid_argument("usernames must differ");

    TimingProbeResult result;
    auto& report = result.report;
    report.kind = "timing";
    ReportClock clock(report);

    std::mt19937_64 rng(config.seed);
    std::uint64_t n = 0;
    std::uint64_t errors = 0;
    const auto total = config.warmup_per_class + config.samples_per_class;
    for (std::size_t i = 0; i < total; ++i) {
        bool valid_first = (rng() & 1) != 0;
        for (int k = 0; k < 2; ++k) {
            bool valid = (k == 0) == valid_first;
            double latency;
            try {
                latency = measure_connect(config, valid ? config.valid_username : invalid, n++);
            } catch (const net::NetworkError&) {
                ++errors;
                continue;
            }
            if (i < config.warmup_per_class) continue;
            (valid ? result.valid_user_s : result.unknown_user_s).push_back(latency);
        }
    }

    report.counters = {{"samples_valid_user", result.valid_user_s.size()},
                       {"samples_unknown_user", result.unknown_user_s.size()}};
    report.errors = {{"network", errors}};
    try {
        result.test = welch_test(result.valid_user_s, result.unknown_user_s, config.alpha);
        report.outcome = result.test.significant ? "side-channel" : "no-side-channel";
        const auto& t = result.test;
        report.details = {{"valid_user", {{"n", t.a.n}, {"mean_s", t.a.mean}, {"stddev_s", t.a.stddev}}},
                          {"unknown_user", {{"n", t.b.n}, {"mean_s", t.b.mean}, {"stddev_s", t.b.stddev}}},
                          {"test", "welch-t"},
                          {"t_statistic", t.t_statistic},
                          {"degrees_of_freedom", t.degrees_of_freedom},
                          {"p_value", t.p_value},
                          {"alpha", t.alpha},
                          {"significant", t.significant}};
    } catch (const InsufficientSamples& e) {
        report.outcome = "insufficient-samples";
        report.details["error"] = e.what();
    }
    clock.finish();
    return result;
}

}  // namespace mqttbed::attacks
