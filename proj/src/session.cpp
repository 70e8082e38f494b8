#include "oblog/session.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace oblog::net {

namespace {

constexpr char MAGIC[4] = {'O', 'B', 'L', '1'};
constexpr int HANDSHAKE_CHUNK = 36;  // magic + ephemeral public key

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return left.count() > 0 ? int(left.count()) : 0;
}

void set_nodelay(int fd) {
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void read_exact(int fd, uint8_t* out, size_t n, Clock::time_point deadline) {
    size_t got = 0;
    while (got < n) {
        struct pollfd pfd{fd, POLLIN, 0};
        int pr = poll(&pfd, 1, remaining_ms(deadline));
        if (pr == 0) throw HandshakeError("handshake timed out");
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw SessionError(std::string("poll: ") + std::strerror(errno));
        }
        ssize_t r = ::recv(fd, out + got, n - got, 0);
        if (r == 0) throw SessionClosed("peer closed during handshake");
        if (r < 0) {
            if (errno == EINTR) continue;
            throw SessionError(std::string("recv: ") + std::strerror(errno));
        }
        got += size_t(r);
    }
}

void write_all(int fd, const uint8_t* data, size_t n) {
    size_t sent = 0;
    while (sent < n) {
        ssize_t w = ::send(fd, data + sent, n - sent, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            if (errno == EPIPE || errno == ECONNRESET) throw SessionClosed("peer closed");
            throw SessionError(std::string("send: ") + std::strerror(errno));
        }
        sent += size_t(w);
    }
}

crypto::Nonce counter_nonce(uint64_t counter) {
    crypto::Nonce n{};
    for (int i = 0; i < 8; ++i) n[size_t(i)] = uint8_t(counter >> (8 * i));
    return n;
}

std::array<uint8_t, 16> fingerprint_of(const crypto::PublicKey& eph_pk) {
    bytes d = crypto::digest(byte_view(eph_pk.data(), eph_pk.size()), 16);
    std::array<uint8_t, 16> out{};
    std::copy(d.begin(), d.end(), out.begin());
    return out;
}

bytes link_auth_message(const crypto::PublicKey& eph_pk, const crypto::PublicKey& server_pk) {
    bytes m = to_bytes("link-auth-v1");
    m.insert(m.end(), eph_pk.begin(), eph_pk.end());
    m.insert(m.end(), server_pk.begin(), server_pk.end());
    return m;
}

}  // namespace

Listener::Listener(const std::string& host, uint16_t port) {
    crypto::init();
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw SessionError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        fd_ = -1;
        throw SessionError("listener host must be an IPv4 address: " + host);
    }
    if (bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || listen(fd_, 64) < 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw SessionError(std::string("bind/listen: ") + std::strerror(err));
    }
    socklen_t len = sizeof(addr);
    getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

Listener::Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) {
    o.fd_ = -1;
    o.port_ = 0;
}

Listener& Listener::operator=(Listener&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = o.fd_;
        port_ = o.port_;
        o.fd_ = -1;
        o.port_ = 0;
    }
    return *this;
}

int Listener::accept(int timeout_ms) {
    struct pollfd pfd{fd_, POLLIN, 0};
    int pr = poll(&pfd, 1, timeout_ms);
    if (pr <= 0) return -1;
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd >= 0) set_nodelay(cfd);
    return cfd;
}

void Listener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Session::~Session() { close(); }

void Session::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

wire::Frame Session::seal_frame(const wire::Frame& f) {
    bytes plain;
    plain.reserve(1 + f.payload.size());
    plain.push_back(uint8_t(f.kind));
    append_bytes(plain, f.payload);
    wire::Frame out;
    out.kind = f.kind;
    out.payload = crypto::seal(tx_key_, counter_nonce(tx_counter_++), plain);
    return out;
}

wire::Frame Session::open_frame(const wire::Frame& f) {
    auto plain = crypto::open(rx_key_, counter_nonce(rx_counter_++), f.payload);
    if (!plain || plain->empty() || (*plain)[0] != uint8_t(f.kind))
        throw SessionError("frame authentication failed");
    wire::Frame out;
    out.kind = f.kind;
    out.payload.assign(plain->begin() + 1, plain->end());
    return out;
}

void Session::send_raw(const bytes& buf) {
    write_all(fd_, buf.data(), buf.size());
    stats_.bytes_sent += buf.size();
    stats_.frames_sent += 1;
}

void Session::send(const wire::Frame& f) {
    std::lock_guard<std::mutex> lk(send_mu_);
    if (fd_ < 0) throw SessionClosed("session closed");
    send_raw(wire::encode_frame(seal_frame(f)));
}

std::optional<wire::Frame> Session::recv_wire(int timeout_ms) {
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        if (auto f = reader_.next()) return f;
        if (reader_.poisoned()) throw SessionError("malformed frame stream");
        if (fd_ < 0) throw SessionClosed("session closed");
        struct pollfd pfd{fd_, POLLIN, 0};
        int pr = poll(&pfd, 1, remaining_ms(deadline));
        if (pr == 0) return std::nullopt;
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw SessionError(std::string("poll: ") + std::strerror(errno));
        }
        uint8_t chunk[65536];
        ssize_t r = ::recv(fd_, chunk, sizeof(chunk), 0);
        if (r == 0) throw SessionClosed("peer closed");
        if (r < 0) {
            if (errno == EINTR) continue;
            if (errno == ECONNRESET) throw SessionClosed("peer closed");
            throw SessionError(std::string("recv: ") + std::strerror(errno));
        }
        stats_.bytes_received += uint64_t(r);
        reader_.feed(byte_view(chunk, size_t(r)));
    }
}

std::optional<wire::Frame> Session::recv(int timeout_ms) {
    auto f = recv_wire(timeout_ms);
    if (!f) return std::nullopt;
    stats_.frames_received += 1;
    return open_frame(*f);
}

Session::ConnectResult Session::connect(const std::string& host, uint16_t port,
                                        const crypto::PublicKey& server_box_pk,
                                        const bytes& expected_digest, wire::Role role,
                                        const crypto::SecretKey* leader_sign_seed, Rng& rng,
                                        int timeout_ms) {
    crypto::init();
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string port_str = std::to_string(port);
    if (getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res)
        throw SessionError("cannot resolve " + host);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        freeaddrinfo(res);
        throw SessionError(std::string("socket: ") + std::strerror(errno));
    }
    int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    freeaddrinfo(res);
    if (rc < 0) {
        int err = errno;
        ::close(fd);
        throw SessionError("connect " + host + ":" + port_str + ": " + std::strerror(err));
    }
    set_nodelay(fd);

    auto s = std::unique_ptr<Session>(new Session());
    s->fd_ = fd;

    crypto::Seed eph_seed;
    rng.fill(eph_seed.data(), eph_seed.size());
    crypto::PublicKey eph_pk;
    crypto::SecretKey eph_sk;
    crypto_kx_seed_keypair(eph_pk.data(), eph_sk.data(), eph_seed.data());

    uint8_t intro[HANDSHAKE_CHUNK];
    std::memcpy(intro, MAGIC, 4);
    std::memcpy(intro + 4, eph_pk.data(), eph_pk.size());
    write_all(fd, intro, sizeof(intro));
    s->stats_.bytes_sent += sizeof(intro);

    if (crypto_kx_client_session_keys(s->rx_key_.data(), s->tx_key_.data(), eph_pk.data(),
                                      eph_sk.data(), server_box_pk.data()) != 0)
        throw HandshakeError("key agreement failed");
    sodium_memzero(eph_sk.data(), eph_sk.size());
    s->fingerprint_ = fingerprint_of(eph_pk);

    auto hello_frame = s->recv(remaining_ms(deadline));
    if (!hello_frame) throw HandshakeError("handshake timed out");
    if (hello_frame->kind != wire::Kind::Hello) throw HandshakeError("expected hello");
    auto hello = wire::decode_hello(hello_frame->payload);
    if (!hello) throw HandshakeError("malformed hello");
    if (hello->config_digest != expected_digest)
        throw HandshakeError("server config digest mismatch");

    wire::HelloAck ack;
    ack.role = role;
    ack.config_digest = expected_digest;
    if (role == wire::Role::Leader) {
        if (!leader_sign_seed) throw HandshakeError("leader link needs a signing key");
        ack.sig = crypto::sign(*leader_sign_seed, link_auth_message(eph_pk, server_box_pk));
    }
    s->send(wire::Frame{wire::Kind::HelloAck, wire::encode_hello_ack(ack)});

    ConnectResult out;
    out.session = std::move(s);
    out.hello = std::move(*hello);
    return out;
}

Session::AcceptResult Session::accept(int fd, const crypto::BoxKeyPair& server_keys,
                                      const wire::Hello& hello, const bytes& expected_digest,
                                      const crypto::PublicKey& leader_sign_pk, int timeout_ms) {
    crypto::init();
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    auto s = std::unique_ptr<Session>(new Session());
    s->fd_ = fd;

    uint8_t intro[HANDSHAKE_CHUNK];
    read_exact(fd, intro, sizeof(intro), deadline);
    s->stats_.bytes_received += sizeof(intro);
    if (std::memcmp(intro, MAGIC, 4) != 0) throw HandshakeError("bad protocol magic");
    crypto::PublicKey eph_pk;
    std::memcpy(eph_pk.data(), intro + 4, eph_pk.size());

    if (crypto_kx_server_session_keys(s->rx_key_.data(), s->tx_key_.data(),
                                      server_keys.pk.data(), server_keys.sk.data(),
                                      eph_pk.data()) != 0)
        throw HandshakeError("key agreement failed");
    s->fingerprint_ = fingerprint_of(eph_pk);

    s->send(wire::Frame{wire::Kind::Hello, wire::encode_hello(hello)});

    auto ack_frame = s->recv(remaining_ms(deadline));
    if (!ack_frame) throw HandshakeError("handshake timed out");
    if (ack_frame->kind != wire::Kind::HelloAck) throw HandshakeError("expected hello ack");
    auto ack = wire::decode_hello_ack(ack_frame->payload);
    if (!ack) throw HandshakeError("malformed hello ack");
    if (ack->config_digest != expected_digest) {
        wire::ErrorBody e{0, wire::Status::Malformed, "config digest mismatch"};
        s->send(wire::Frame{wire::Kind::Error, wire::encode_error(e)});
        throw HandshakeError("peer config digest mismatch");
    }
    if (ack->role == wire::Role::Leader) {
        if (!crypto::verify(leader_sign_pk, link_auth_message(eph_pk, server_keys.pk),
                            *ack->sig)) {
            wire::ErrorBody e{0, wire::Status::Malformed, "leader authentication failed"};
            s->send(wire::Frame{wire::Kind::Error, wire::encode_error(e)});
            throw HandshakeError("leader authentication failed");
        }
    }

    AcceptResult out;
    out.session = std::move(s);
    out.role = ack->role;
    return out;
}

}  // namespace oblog::net
