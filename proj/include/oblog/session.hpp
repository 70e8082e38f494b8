#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/rng.hpp"
#include "oblog/wire.hpp"

namespace oblog::net {

struct SessionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SessionClosed : SessionError {
    using SessionError::SessionError;
};
struct HandshakeError : SessionError {
    using SessionError::SessionError;
};

// Listening TCP socket; port 0 binds an ephemeral port.
class Listener {
public:
    Listener() = default;
    Listener(const std::string& host, uint16_t port);
    ~Listener();
    Listener(Listener&& o) noexcept;
    Listener& operator=(Listener&& o) noexcept;
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    uint16_t port() const { return port_; }
    // Accepted fd, or -1 on timeout.
    int accept(int timeout_ms);
    void close();
    bool valid() const { return fd_ >= 0; }

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

struct SessionStats {
    std::atomic<uint64_t> bytes_sent{0};
    std::atomic<uint64_t> bytes_received{0};
    std::atomic<uint64_t> frames_sent{0};
    std::atomic<uint64_t> frames_received{0};
};

// Encrypted frame channel. The initiator presents a fresh ephemeral key, the
// responder is authenticated by its static key: both directions then run
// under session keys with counter nonces. Payloads carry their frame kind
// inside the sealed region, so neither header can be swapped in transit.
class Session {
public:
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    struct ConnectResult {
        std::unique_ptr<Session> session;
        wire::Hello hello;
    };

    // Dial and authenticate a server. The hello the server sends back must
    // carry expected_digest or the handshake fails. A leader link signs its
    // ephemeral key so the responder can check it against the leader's key.
    static ConnectResult connect(const std::string& host, uint16_t port,
                                 const crypto::PublicKey& server_box_pk,
                                 const bytes& expected_digest, wire::Role role,
                                 const crypto::SecretKey* leader_sign_seed, Rng& rng,
                                 int timeout_ms);

    struct AcceptResult {
        std::unique_ptr<Session> session;
        wire::Role role = wire::Role::Client;
    };

    // Responder side on an accepted fd. leader_sign_pk gates who may claim
    // the leader role; clients must present a matching config digest.
    static AcceptResult accept(int fd, const crypto::BoxKeyPair& server_keys,
                               const wire::Hello& hello, const bytes& expected_digest,
                               const crypto::PublicKey& leader_sign_pk, int timeout_ms);

    // Thread-safe; frames go out whole and in call order.
    void send(const wire::Frame& f);
    // nullopt on timeout. Throws SessionClosed on EOF, SessionError on a
    // malformed or tampered stream. Single consumer.
    std::optional<wire::Frame> recv(int timeout_ms);

    // Stable per-connection identity: hash of the initiator's ephemeral key.
    const std::array<uint8_t, 16>& fingerprint() const { return fingerprint_; }
    const SessionStats& stats() const { return stats_; }
    void close();

private:
    Session() = default;

    int fd_ = -1;
    crypto::SymKey tx_key_{};
    crypto::SymKey rx_key_{};
    uint64_t tx_counter_ = 0;
    uint64_t rx_counter_ = 0;
    std::mutex send_mu_;
    wire::FrameReader reader_;
    std::array<uint8_t, 16> fingerprint_{};
    SessionStats stats_;

    void send_raw(const bytes& buf);
    std::optional<wire::Frame> recv_wire(int timeout_ms);
    wire::Frame seal_frame(const wire::Frame& f);
    wire::Frame open_frame(const wire::Frame& f);
};

}  // namespace oblog::net
