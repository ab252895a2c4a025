#include "mqttbed/net/client.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include "mqttbed/wire/codec.hpp"

namespace mqttbed::net {

namespace {

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

int remaining_ms(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

}  // namespace

Endpoint Endpoint::parse(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
        throw std::invalid_argument("expected host:port, got '" + s + "'");
    Endpoint ep;
    ep.host = s.substr(0, colon);
    auto port = std::stoul(s.substr(colon + 1));
    if (port > 65535) throw std::invalid_argument("port out of range in '" + s + "'");
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

TcpStream::~TcpStream() { close(); }

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

TcpStream TcpStream::adopt(int fd) { return TcpStream(fd); }

TcpStream TcpStream::connect(const Endpoint& ep, Millis timeout, const std::string& bind_host) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
            throw NetworkError("cannot resolve " + ep.host);
        addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
        freeaddrinfo(res);
    }

    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw NetworkError(errno_text("socket"));
    TcpStream stream(fd);

    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (!bind_host.empty()) {
        sockaddr_in local{};
        local.sin_family = AF_INET;
        if (inet_pton(AF_INET, bind_host.c_str(), &local.sin_addr) != 1)
            throw NetworkError("invalid bind address " + bind_host);
        if (::bind(fd, reinterpret_cast<sockaddr*>(&local), sizeof local) != 0)
            throw NetworkError(errno_text("bind " + bind_host));
    }

    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc != 0 && errno != EINPROGRESS) throw NetworkError(errno_text("connect " + ep.str()));
    if (rc != 0) {
        pollfd p{fd, POLLOUT, 0};
        int n = ::poll(&p, 1, static_cast<int>(timeout.count()));
        if (n == 0) throw NetworkError("connect " + ep.str() + ": timed out");
        if (n < 0) throw NetworkError(errno_text("poll"));
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            errno = err;
            throw NetworkError(errno_text("connect " + ep.str()));
        }
    }
    ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
    return stream;
}

void TcpStream::send_all(std::span<const std::uint8_t> data) {
    if (fd_ < 0) throw NetworkError("send on closed stream");
    std::size_t sent = 0;
    while (sent < data.size()) {
        auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw NetworkError(errno_text("send"));
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::optional<std::size_t> TcpStream::recv_some(std::span<std::uint8_t> out, Millis timeout) {
    if (fd_ < 0) throw NetworkError("recv on closed stream");
    pollfd p{fd_, POLLIN, 0};
    while (true) {
        int n = ::poll(&p, 1, static_cast<int>(timeout.count()));
        if (n == 0) return std::nullopt;
        if (n < 0) {
            if (errno == EINTR) continue;
            throw NetworkError(errno_text("poll"));
        }
        break;
    }
    while (true) {
        auto n = ::recv(fd_, out.data(), out.size(), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == ECONNRESET) return 0;
            throw NetworkError(errno_text("recv"));
        }
        return static_cast<std::size_t>(n);
    }
}

void TcpStream::shutdown_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void TcpStream::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

// ---------------------------------------------------------------------------

MqttClient::MqttClient(ClientOptions options) : options_(std::move(options)) {}

MqttClient::~MqttClient() = default;

std::uint16_t MqttClient::next_packet_id() {
    packet_id_ = packet_id_ == 65535 ? 1 : static_cast<std::uint16_t>(packet_id_ + 1);
    return packet_id_;
}

wire::Connack MqttClient::connect() {
    stream_ = TcpStream::connect(options_.broker, options_.connect_timeout, options_.bind_host);
    inbuf_.clear();
    messages_.clear();
    controls_.clear();
    eof_ = false;
    wire::Connect c;
    c.client_id = options_.client_id;
    c.clean_session = options_.clean_session;
    c.keep_alive = options_.keep_alive;
    c.credentials = options_.credentials;
    c.will = options_.will;
    send(c);
    auto ack = wait_for([](const auto& p) { return std::holds_alternative<wire::Connack>(p); },
                        options_.connect_timeout);
    if (!ack) {
        stream_.close();
        throw NetworkError(eof_ ? "connection closed before CONNACK" : "timed out waiting for CONNACK");
    }
    auto connack = std::get<wire::Connack>(*ack);
    if (connack.return_code != 0) stream_.close();
    return connack;
}

void MqttClient::send(const wire::ControlPacket& packet) { send_raw(wire::encode_packet(packet)); }

void MqttClient::send_raw(std::span<const std::uint8_t> bytes) {
    stream_.send_all(bytes);
    last_send_ = Clock::now();
}

std::uint16_t MqttClient::publish(const std::string& topic, const wire::Bytes& payload, std::uint8_t qos,
                                  bool retain) {
    wire::Publish p;
    p.topic = topic;
    p.payload = payload;
    p.qos = qos;
    p.retain = retain;
    std::uint16_t id = 0;
    if (qos > 0) {
        id = next_packet_id();
        p.packet_id = id;
    }
    send(p);
    return id;
}

bool MqttClient::publish_confirmed(const std::string& topic, const wire::Bytes& payload, std::uint8_t qos,
                                   bool retain, Millis timeout) {
    auto id = publish(topic, payload, qos, retain);
    if (qos == 0) return true;
    auto deadline = Clock::now() + timeout;
    if (qos == 1) {
        return wait_for([id](const auto& p) {
                   auto* a = std::get_if<wire::Puback>(&p);
                   return a && a->packet_id == id;
               },
                        timeout)
            .has_value();
    }
    auto rec = wait_for([id](const auto& p) {
        auto* a = std::get_if<wire::Pubrec>(&p);
        return a && a->packet_id == id;
    },
                        timeout);
    if (!rec) return false;
    send(wire::Pubrel{id});
    return wait_for([id](const auto& p) {
               auto* a = std::get_if<wire::Pubcomp>(&p);
               return a && a->packet_id == id;
           },
                    Millis(remaining_ms(deadline)))
        .has_value();
}

std::optional<wire::Suback> MqttClient::subscribe(const std::vector<wire::Subscription>& filters,
                                                  Millis timeout) {
    wire::Subscribe s;
    s.packet_id = next_packet_id();
    s.filters = filters;
    send(s);
    auto id = s.packet_id;
    auto ack = wait_for([id](const auto& p) {
        auto* a = std::get_if<wire::Suback>(&p);
        return a && a->packet_id == id;
    },
                        timeout);
    if (!ack) return std::nullopt;
    return std::get<wire::Suback>(*ack);
}

std::optional<wire::Publish> MqttClient::next_message(Millis timeout) {
    auto deadline = Clock::now() + timeout;
    while (messages_.empty()) {
        if (!connected()) return std::nullopt;
        if (!pump(Millis(remaining_ms(deadline)))) return std::nullopt;
        if (Clock::now() >= deadline && messages_.empty()) return std::nullopt;
    }
    auto m = std::move(messages_.front());
    messages_.pop_front();
    return m;
}

std::optional<wire::ControlPacket> MqttClient::next_control(Millis timeout) {
    auto deadline = Clock::now() + timeout;
    while (controls_.empty()) {
        if (!connected()) return std::nullopt;
        if (!pump(Millis(remaining_ms(deadline)))) return std::nullopt;
        if (Clock::now() >= deadline && controls_.empty()) return std::nullopt;
    }
    auto c = std::move(controls_.front());
    controls_.pop_front();
    return c;
}

std::optional<wire::ControlPacket> MqttClient::wait_for(
    const std::function<bool(const wire::ControlPacket&)>& pred, Millis timeout) {
    auto deadline = Clock::now() + timeout;
    while (true) {
        while (!controls_.empty()) {
            auto c = std::move(controls_.front());
            controls_.pop_front();
            if (pred(c)) return c;
        }
        if (!connected()) return std::nullopt;
        auto left = remaining_ms(deadline);
        if (!pump(Millis(left)) && left == 0) return std::nullopt;
        if (Clock::now() >= deadline && controls_.empty()) return std::nullopt;
    }
}

void MqttClient::maybe_ping() {
    if (options_.keep_alive == 0 || !connected()) return;
    if (Clock::now() - last_send_ >= std::chrono::seconds(options_.keep_alive)) send(wire::Pingreq{});
}

bool MqttClient::pump(Millis timeout) {
    // Drain a packet already buffered before touching the socket.
    if (auto d = wire::decode_packet(inbuf_)) {
        inbuf_.erase(inbuf_.begin(), inbuf_.begin() + static_cast<std::ptrdiff_t>(d->consumed));
        handle_inbound(std::move(d->packet));
        return true;
    }
    maybe_ping();
    if (options_.keep_alive > 0) timeout = std::min(timeout, Millis(options_.keep_alive * 500));
    std::array<std::uint8_t, 16384> buf{};
    auto n = stream_.recv_some(buf, timeout);
    if (!n) return false;
    if (*n == 0) {
        eof_ = true;
        stream_.close();
        return false;
    }
    inbuf_.insert(inbuf_.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(*n));
    if (auto d = wire::decode_packet(inbuf_)) {
        inbuf_.erase(inbuf_.begin(), inbuf_.begin() + static_cast<std::ptrdiff_t>(d->consumed));
        handle_inbound(std::move(d->packet));
    }
    return true;
}

void MqttClient::handle_inbound(wire::ControlPacket packet) {
    if (auto* p = std::get_if<wire::Publish>(&packet)) {
        bool deliver = true;
        if (options_.auto_ack && p->qos == 1) send(wire::Puback{*p->packet_id});
        if (p->qos == 2) {
            if (options_.dedupe_qos2 && !inbound_qos2_.insert(*p->packet_id).second) deliver = false;
            if (options_.auto_ack) send(wire::Pubrec{*p->packet_id});
        }
        if (deliver) messages_.push_back(std::move(*p));
        return;
    }
    if (auto* rel = std::get_if<wire::Pubrel>(&packet)) {
        inbound_qos2_.erase(rel->packet_id);
        if (options_.auto_ack) send(wire::Pubcomp{rel->packet_id});
    }
    controls_.push_back(std::move(packet));
}

void MqttClient::disconnect() {
    if (!stream_.is_open()) return;
    try {
        send(wire::Disconnect{});
        stream_.shutdown_write();
        // let the broker observe DISCONNECT before the socket goes away
        std::array<std::uint8_t, 256> buf{};
        for (int i = 0; i < 50; ++i) {
            auto n = stream_.recv_some(buf, Millis(20));
            if (!n || *n == 0) break;
        }
    } catch (const NetworkError&) {
    }
    stream_.close();
}

void MqttClient::abort() { stream_.close(); }

}  // namespace mqttbed::net
