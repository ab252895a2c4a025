#include "mqttbed/attacks/eavesdrop.hpp"

#include <fstream>
#include <stdexcept>

#include "mqttbed/smarthome/runtime.hpp"
#include "mqttbed/util/csv.hpp"
#include "mqttbed/util/time.hpp"

namespace mqttbed::attacks {

EavesdropResult eavesdrop(const EavesdropConfig& config, smarthome::StopToken* stop) {
    EavesdropResult result;
    auto& report = result.report;
    report.kind = "eavesdrop";
    ReportClock clock(report);
    report.counters["captured"] = 0;

    net::ClientOptions opts;
    opts.broker = config.broker;
    opts.client_id = config.client_id;
    opts.credentials = config.credentials;
    opts.bind_host = config.bind_host;
    opts.keep_alive = 30;
    net::MqttClient client(opts);

    auto finish = [&](std::string outcome) {
        report.outcome = std::move(outcome);
        if (!config.output_csv.empty()) write_capture_csv(config.output_csv, result.rows);
        clock.finish();
        return std::move(result);
    };

    try {
        auto connack = client.connect();
        if (connack.return_code != 0) {
            report.details["connack"] = connack.return_code;
            return finish(connack.return_code == 5 || connack.return_code == 4 ? "access denied"
                                                                                : "connection refused");
        }
        auto suback = client.subscribe({{config.filter, 0}}, net::Millis(5000));
        if (!suback || suback->return_codes.empty() || suback->return_codes[0] == wire::kSubackFailure) {
            client.disconnect();
            return finish("subscription denied");
        }
        result.subscribed_at = std::chrono::steady_clock::now();
    } catch (const std::exception& e) {
        report.errors["network"] += 1;
        report.details["error"] = e.what();
        return finish("connection failed");
    }

    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(config.duration_s));
    std::map<std::string, std::uint64_t> per_topic;
    try {
        while (std::chrono::steady_clock::now() < deadline) {
            if (stop && stop->stop_requested()) break;
            if (config.max_messages && result.rows.size() >= config.max_messages) break;
            if (!client.connected()) {
                report.errors["disconnected"] += 1;
                break;
            }
            auto left = std::chrono::duration_cast<net::Millis>(deadline - std::chrono::steady_clock::now());
            auto msg = client.next_message(std::min(left, net::Millis(200)));
            if (!msg) continue;
            result.rows.push_back({util::iso8601_now(), msg->topic, util::escape_bytes(msg->payload)});
            ++per_topic[msg->topic];
        }
        result.capture_end = std::chrono::steady_clock::now();
        client.disconnect();
    } catch (const std::exception& e) {
        result.capture_end = std::chrono::steady_clock::now();
        report.errors["network"] += 1;
        report.details["error"] = e.what();
    }
    report.counters["captured"] = result.rows.size();
    report.details["per_topic"] = per_topic;
    return finish("captured");
}

void write_capture_csv(const std::string& path, const std::vector<CaptureRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    util::write_csv_row(out, {"timestamp", "topic", "payload"});
    for (const auto& r : rows) util::write_csv_row(out, {r.timestamp, r.topic, r.payload});
}

std::vector<CaptureRow> read_capture_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    auto table = util::parse_csv(in);
    if (table.empty() || table[0] != std::vector<std::string>{"timestamp", "topic", "payload"})
        throw std::runtime_error(path + ": missing capture header");
    std::vector<CaptureRow> rows;
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i].size() != 3) throw std::runtime_error(path + ": malformed row " + std::to_string(i));
        rows.push_back({table[i][0], table[i][1], table[i][2]});
    }
    return rows;
}

}  // namespace mqttbed::attacks
