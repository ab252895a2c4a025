#include "mqttbed/smarthome/sensor.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "mqttbed/wire/topic.hpp"

namespace mqttbed::smarthome {

namespace {

// 53 high bits -> [0, 1); mt19937_64 output is fixed by the standard, this
// mapping keeps the whole sequence portable.
double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

}  // namespace

std::string_view sensor_kind_name(SensorKind k) {
    return k == SensorKind::Temperature ? "temperature" : "door";
}

void SensorConfig::validate() const {
    if (!(publish_interval_s > 0)) throw std::invalid_argument(name + ": publish_interval must be positive");
    if (qos > 2) throw std::invalid_argument(name + ": qos must be 0..2");
    if (!wire::is_valid_topic_name(topic)) throw std::invalid_argument(name + ": invalid topic '" + topic + "'");
    if (kind == SensorKind::Temperature) {
        if (temperature.amplitude < 0 || temperature.noise < 0)
            throw std::invalid_argument(name + ": amplitude and noise must be non-negative");
        if (temperature.period_ticks == 0) throw std::invalid_argument(name + ": period_ticks must be positive");
    } else if (!(door.toggle_probability >= 0 && door.toggle_probability <= 1)) {
        throw std::invalid_argument(name + ": toggle_probability must be in [0,1]");
    }
}

std::string temperature_payload(double celsius) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "{\"temperature\": %.2f}", celsius);
    return buf;
}

std::string door_payload(bool open) {
    return open ? "{\"door_state\": \"open\"}" : "{\"door_state\": \"closed\"}";
}

SensorSimulator::SensorSimulator(SensorConfig config)
    : config_(std::move(config)), rng_(config_.seed), door_open_(config_.door.initially_open) {
    config_.validate();
}

wire::Bytes SensorSimulator::next() {
    const double u = unit(rng_());
    const auto t = tick_++;
    if (config_.kind == SensorKind::Door) {
        if (u < config_.door.toggle_probability) door_open_ = !door_open_;
        return wire::to_bytes(door_payload(door_open_));
    }
    const auto& m = config_.temperature;
    double phase = 2.0 * std::numbers::pi * static_cast<double>(t % m.period_ticks) / m.period_ticks;
    double value = m.base + m.amplitude * std::sin(phase) + m.noise * (2.0 * u - 1.0);
    value = std::round(value * 100.0) / 100.0;
    return wire::to_bytes(temperature_payload(value));
}

wire::Bytes sensor_tick(const SensorConfig& config, std::uint64_t tick_index) {
    SensorSimulator sim(config);
    for (std::uint64_t i = 0; i < tick_index; ++i) sim.next();
    return sim.next();
}

}  // namespace mqttbed::smarthome
