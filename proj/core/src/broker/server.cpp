#include "mqttbed/broker/server.hpp"

#include <array>
#include <boost/asio.hpp>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace mqttbed::broker {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {
constexpr std::size_t kReadChunk = 8192;
constexpr auto kTickInterval = std::chrono::milliseconds(250);
}  // namespace

struct BrokerServer::Impl {
    struct Link : std::enable_shared_from_this<Link> {
        Link(Impl& owner, tcp::socket s, ConnectionId id) : impl(owner), socket(std::move(s)), id(id) {}

        Impl& impl;
        tcp::socket socket;
        ConnectionId id;
        std::array<std::uint8_t, kReadChunk> buffer{};
        std::deque<wire::Bytes> pending;
        wire::Bytes writing;
        bool write_active = false;
        bool close_after_flush = false;
        bool closed = false;

        void read() {
            socket.async_read_some(asio::buffer(buffer), [self = shared_from_this()](auto ec, std::size_t n) {
                if (self->closed) return;
                if (ec) {
                    self->impl.lost(self->id);
                    return;
                }
                self->impl.received(self->id, std::span<const std::uint8_t>(self->buffer.data(), n));
                if (!self->closed) self->read();
            });
        }

        void enqueue(wire::Bytes bytes) {
            if (closed) return;
            pending.push_back(std::move(bytes));
            flush();
        }

        void flush() {
            if (write_active || closed) return;
            if (pending.empty()) {
                if (close_after_flush) shutdown();
                return;
            }
            writing.clear();
            for (auto& b : pending) writing.insert(writing.end(), b.begin(), b.end());
            pending.clear();
            write_active = true;
            asio::async_write(socket, asio::buffer(writing), [self = shared_from_this()](auto ec, std::size_t) {
                self->write_active = false;
                if (ec) {
                    if (!self->closed) self->impl.lost(self->id);
                    return;
                }
                self->flush();
            });
        }

        void shutdown() {
            if (closed) return;
            closed = true;
            boost::system::error_code ignored;
            socket.shutdown(tcp::socket::shutdown_both, ignored);
            socket.close(ignored);
            impl.links.erase(id);
        }
    };

    Impl(SecurityPolicy policy, ListenAddress l, EventSink* events)
        : listen(std::move(l)), core(std::move(policy), events), acceptor(io), timer(io) {}

    ListenAddress listen;
    mutable std::mutex mutex;
    BrokerCore core;
    asio::io_context io;
    tcp::acceptor acceptor;
    asio::steady_timer timer;
    std::thread thread;
    std::unordered_map<ConnectionId, std::shared_ptr<Link>> links;
    ConnectionId next_id = 1;
    std::uint16_t bound_port = 0;
    bool started = false;

    void apply(std::vector<BrokerAction> actions) {
        for (auto& action : actions) {
            if (auto* s = std::get_if<SendBytes>(&action)) {
                if (auto it = links.find(s->connection); it != links.end()) it->second->enqueue(std::move(s->bytes));
            } else {
                auto id = std::get<CloseConnection>(action).connection;
                if (auto it = links.find(id); it != links.end()) {
                    auto link = it->second;
                    link->close_after_flush = true;
                    link->flush();
                }
            }
        }
    }

    void received(ConnectionId id, std::span<const std::uint8_t> data) {
        std::vector<BrokerAction> actions;
        {
            std::lock_guard lock(mutex);
            core.receive(id, data, Clock::now());
            actions = core.take_actions();
        }
        apply(std::move(actions));
    }

    void lost(ConnectionId id) {
        std::vector<BrokerAction> actions;
        {
            std::lock_guard lock(mutex);
            core.connection_lost(id, Clock::now());
            actions = core.take_actions();
        }
        if (auto it = links.find(id); it != links.end()) {
            auto link = it->second;
            link->shutdown();
        }
        apply(std::move(actions));
    }

    void accept() {
        acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec == asio::error::operation_aborted) return;
            if (!ec) {
                boost::system::error_code opt_ec;
                socket.set_option(tcp::no_delay(true), opt_ec);
                auto remote = socket.remote_endpoint(opt_ec);
                std::string source = opt_ec ? std::string("unknown") : remote.address().to_string();
                auto id = next_id++;
                auto link = std::make_shared<Link>(*this, std::move(socket), id);
                links.emplace(id, link);
                {
                    std::lock_guard lock(mutex);
                    core.open(id, source, Clock::now());
                }
                link->read();
            }
            accept();
        });
    }

    void tick() {
        timer.expires_after(kTickInterval);
        timer.async_wait([this](boost::system::error_code ec) {
            if (ec) return;
            std::vector<BrokerAction> actions;
            {
                std::lock_guard lock(mutex);
                core.tick(Clock::now());
                actions = core.take_actions();
            }
            apply(std::move(actions));
            tick();
        });
    }
};

BrokerServer::BrokerServer(SecurityPolicy policy, ListenAddress listen, EventSink* events)
    : impl_(std::make_unique<Impl>(std::move(policy), std::move(listen), events)) {}

BrokerServer::~BrokerServer() { stop(); }

void BrokerServer::start() {
    if (impl_->started) return;
    auto& im = *impl_;
    tcp::endpoint ep(asio::ip::make_address(im.listen.host), im.listen.port);
    im.acceptor.open(ep.protocol());
    im.acceptor.set_option(tcp::acceptor::reuse_address(true));
    im.acceptor.bind(ep);
    im.acceptor.listen(asio::socket_base::max_listen_connections);
    im.bound_port = im.acceptor.local_endpoint().port();
    im.accept();
    im.tick();
    im.started = true;
    im.thread = std::thread([&im] { im.io.run(); });
}

void BrokerServer::stop() {
    if (!impl_ || !impl_->started) return;
    auto& im = *impl_;
    asio::post(im.io, [&im] {
        boost::system::error_code ignored;
        im.acceptor.close(ignored);
        im.timer.cancel();
        auto links = im.links;
        for (auto& [id, link] : links) link->shutdown();
        im.io.stop();
    });
    if (im.thread.joinable()) im.thread.join();
    im.started = false;
}

bool BrokerServer::running() const { return impl_->started; }

std::uint16_t BrokerServer::port() const { return impl_->bound_port; }

std::string BrokerServer::host() const { return impl_->listen.host; }

BrokerStats BrokerServer::stats() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->core.stats();
}

std::size_t BrokerServer::open_connections() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->core.connection_count();
}

void BrokerServer::inspect(const std::function<void(const BrokerCore&)>& f) const {
    std::lock_guard lock(impl_->mutex);
    f(impl_->core);
}

}  // namespace mqttbed::broker
