#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "mqttbed/broker/core.hpp"

namespace mqttbed::broker {

struct ListenAddress {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;  // 0 picks an ephemeral port
};

/// TCP front end for BrokerCore. One event-loop thread serves every
/// connection; core operations run under a mutex so observers on other
/// threads see consistent state.
class BrokerServer {
public:
    BrokerServer(SecurityPolicy policy, ListenAddress listen, EventSink* events = nullptr);
    ~BrokerServer();

    BrokerServer(const BrokerServer&) = delete;
    BrokerServer& operator=(const BrokerServer&) = delete;

    /// Binds and starts the event loop thread. Throws std::system_error when
    /// the address cannot be bound.
    void start();
    void stop();
    bool running() const;

    std::uint16_t port() const;
    std::string host() const;

    BrokerStats stats() const;
    std::size_t open_connections() const;

    /// Runs `f` with exclusive access to the protocol engine.
    void inspect(const std::function<void(const BrokerCore&)>& f) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mqttbed::broker
