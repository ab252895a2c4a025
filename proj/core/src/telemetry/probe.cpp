#include "mqttbed/telemetry/probe.hpp"

#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mqttbed::telemetry {

wire::Bytes probe_payload(std::uint64_t seq, double sent_at) {
    char buf[96];
    int n = std::snprintf(buf, sizeof buf, "{\"seq\": %llu, \"sent_at\": %.9f}",
                          static_cast<unsigned long long>(seq), sent_at);
    return wire::Bytes(buf, buf + n);
}

std::optional<std::pair<std::uint64_t, double>> parse_probe_payload(std::span<const std::uint8_t> payload) {
    auto j = nlohmann::json::parse(payload.begin(), payload.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    auto seq = j.find("seq");
    auto sent = j.find("sent_at");
    if (seq == j.end() || sent == j.end() || !seq->is_number_unsigned() || !sent->is_number()) return std::nullopt;
    return std::make_pair(seq->get<std::uint64_t>(), sent->get<double>());
}

LatencyProbe::LatencyProbe(ProbeConfig config)
    : config_(std::move(config)), epoch_(std::chrono::steady_clock::now()) {
    if (config_.interval_s <= 0) throw std::invalid_argument("probe interval must be positive");
    if (config_.qos > 2) throw std::invalid_argument("probe qos must be 0, 1 or 2");
}

LatencyProbe::~LatencyProbe() { stop(std::chrono::milliseconds(0)); }

double LatencyProbe::now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void LatencyProbe::set_state(std::string label) {
    std::lock_guard lock(mutex_);
    state_ = label.empty() ? kDefaultState : std::move(label);
}

std::vector<LatencySample> LatencyProbe::samples() const {
    std::lock_guard lock(mutex_);
    return samples_;
}

void LatencyProbe::start() {
    net::ClientOptions opts;
    opts.broker = config_.broker;
    opts.client_id = config_.client_id_prefix + "-sub";
    opts.credentials = config_.credentials;
    opts.keep_alive = 60;
    sub_client_ = std::make_unique<net::MqttClient>(opts);
    if (sub_client_->connect().return_code != 0) throw net::NetworkError("probe subscriber refused");
    auto ack = sub_client_->subscribe({{config_.topic, config_.qos}}, net::Millis(5000));
    if (!ack || ack->return_codes.at(0) == wire::kSubackFailure)
        throw net::NetworkError("probe subscription refused");
    subscriber_ = std::thread([this] { subscribe_loop(); });
    publisher_ = std::thread([this] { publish_loop(); });
}

void LatencyProbe::publish_loop() {
    net::ClientOptions opts;
    opts.broker = config_.broker;
    opts.client_id = config_.client_id_prefix + "-pub";
    opts.credentials = config_.credentials;
    opts.keep_alive = 60;
    net::MqttClient client(opts);
    bool connected = false;
    auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(config_.interval_s));
    auto next = std::chrono::steady_clock::now();
    for (std::uint64_t seq = 1; config_.count == 0 || seq <= config_.count; ++seq) {
        if (!publish_stop_.sleep_until(next)) break;
        next += interval;
        LatencySample sample;
        sample.seq = seq;
        try {
            if (!connected) {
                connected = client.connect().return_code == 0;
                if (!connected) throw net::NetworkError("probe publisher refused");
            }
            while (client.next_control(net::Millis(0))) {
            }
            sample.sent_at = now();
            {
                std::lock_guard lock(mutex_);
                sample.network_state = state_;
                samples_.push_back(sample);
            }
            client.publish(config_.topic, probe_payload(seq, sample.sent_at), config_.qos);
        } catch (const std::exception&) {
            ++errors_;
            connected = false;
            client.abort();
        }
    }
    publishing_done_ = true;
    if (connected) client.disconnect();
}

void LatencyProbe::subscribe_loop() {
    while (!subscriber_stop_) {
        std::optional<wire::Publish> msg;
        try {
            msg = sub_client_->next_message(net::Millis(100));
        } catch (const std::exception&) {
            ++errors_;
            break;
        }
        if (!msg) {
            if (!sub_client_->connected()) break;
            continue;
        }
        auto received = now();
        auto parsed = parse_probe_payload(msg->payload);
        if (!parsed) continue;
        std::lock_guard lock(mutex_);
        // seq starts at 1 and samples are appended in seq order, minus send failures
        for (auto it = samples_.rbegin(); it != samples_.rend(); ++it) {
            if (it->seq == parsed->first) {
                if (!it->received_at && received - it->sent_at <= config_.loss_timeout_s)
                    it->received_at = received;
                break;
            }
            if (it->seq < parsed->first) break;
        }
    }
}

bool LatencyProbe::all_settled() const {
    std::lock_guard lock(mutex_);
    auto t = now();
    for (const auto& s : samples_)
        if (!s.received_at && t - s.sent_at < config_.loss_timeout_s) return false;
    return true;
}

void LatencyProbe::wait_finished() {
    if (publisher_.joinable()) publisher_.join();
    while (!all_settled()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
}

void LatencyProbe::stop(std::chrono::milliseconds drain) {
    publish_stop_.request_stop();
    if (publisher_.joinable()) publisher_.join();
    auto deadline = std::chrono::steady_clock::now() + drain;
    while (std::chrono::steady_clock::now() < deadline && !all_settled())
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    subscriber_stop_ = true;
    if (subscriber_.joinable()) subscriber_.join();
    if (sub_client_) {
        sub_client_->disconnect();
        sub_client_.reset();
    }
}

std::vector<LatencySample> probe_run(const ProbeConfig& config) {
    if (config.count == 0) throw std::invalid_argument("probe_run needs a positive count");
    LatencyProbe probe(config);
    probe.start();
    probe.wait_finished();
    probe.stop(std::chrono::milliseconds(0));
    auto samples = probe.samples();
    bool any = false;
    for (const auto& s : samples) any = any || s.delivered();
    if (!any) throw ServiceDenied();
    return samples;
}

}  // namespace mqttbed::telemetry
