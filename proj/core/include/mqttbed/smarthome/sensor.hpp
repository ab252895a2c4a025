#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "mqttbed/wire/packet.hpp"

namespace mqttbed::smarthome {

enum class SensorKind { Temperature, Door };

std::string_view sensor_kind_name(SensorKind k);

/// Sinusoid over the tick index plus seeded uniform noise in [-noise, noise].
struct TemperatureModel {
    double base = 23.5;
    double amplitude = 1.5;
    double noise = 0.3;
    std::uint32_t period_ticks = 60;
};

struct DoorModel {
    double toggle_probability = 0.2;
    bool initially_open = false;
};

struct SensorConfig {
    std::string name = "sensor";
    SensorKind kind = SensorKind::Temperature;
    std::string topic = "home/livingroom/temperature";
    double publish_interval_s = 1.0;
    std::uint8_t qos = 0;
    std::uint64_t seed = 42;
    TemperatureModel temperature;
    DoorModel door;

    /// Throws std::invalid_argument on an out-of-range field.
    void validate() const;
};

/// Deterministic reading generator; one RNG draw per tick for either kind.
class SensorSimulator {
public:
    explicit SensorSimulator(SensorConfig config);

    /// Payload for the next tick, then advances.
    wire::Bytes next();

    std::uint64_t tick() const { return tick_; }
    const SensorConfig& config() const { return config_; }

private:
    SensorConfig config_;
    std::mt19937_64 rng_;
    std::uint64_t tick_ = 0;
    bool door_open_ = false;
};

/// Payload emitted at `tick_index` (replays the generator from tick 0).
wire::Bytes sensor_tick(const SensorConfig& config, std::uint64_t tick_index);

/// {"temperature": 23.40}, value rounded to two decimals.
std::string temperature_payload(double celsius);
/// {"door_state": "open"}
std::string door_payload(bool open);

}  // namespace mqttbed::smarthome
